use crate::error::{Error, Result};
use crate::model::{ControlVector, ModelParams, StateVector, Vec4};
use crate::ode::{rk4_step, TimeGrid, Trajectory};

#[derive(Debug, Clone)]
pub struct MinTimeResult {
    /// crossing time, linearly interpolated inside the crossing interval
    pub t_final: f64,
    /// samples up to and including the first node below the detection level
    pub trajectory: Trajectory,
}

/// Minimum time for the virion load to drop below `detection_level`.
///
/// Full therapy is optimal for this objective, so no iteration is needed: the
/// state is integrated under the constant control `u_full` until the first
/// grid interval where `x1` crosses the level, and the crossing time is
/// located by linear interpolation within that interval (accurate to the
/// order of `h`).
pub fn solve_min_time(
    x0: &StateVector,
    u_full: &ControlVector,
    detection_level: f64,
    h: f64,
    p: &ModelParams,
    t_max: f64,
) -> Result<MinTimeResult> {
    if !(detection_level.is_finite() && detection_level > 0.0) {
        return Err(Error::InvalidInput(format!(
            "detection level must be finite and > 0, got {detection_level}"
        )));
    }
    if !(h.is_finite() && h > 0.0 && t_max.is_finite() && t_max > 0.0) {
        return Err(Error::InvalidInput(format!(
            "step and horizon must be finite and > 0, got h = {h}, t_max = {t_max}"
        )));
    }
    if !x0.is_finite() || !x0.is_nonnegative() {
        return Err(Error::InvalidInput(format!(
            "initial state must be finite and nonnegative, got {:?}",
            x0.to_array()
        )));
    }
    if x0.x1() <= detection_level {
        return Err(Error::InvalidInput(format!(
            "initial virion load {} is already at or below the detection level {detection_level}",
            x0.x1()
        )));
    }
    if !u_full.is_finite() || u_full.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
        return Err(Error::InvalidInput(format!(
            "control must lie in [0, 1], got {:?}",
            u_full.to_array()
        )));
    }

    let max_steps = (t_max / h).ceil() as usize;
    let rhs = |_: f64, y: &Vec4| p.derivative(&StateVector(*y), u_full).0;
    let mut states = vec![*x0];
    let mut x = x0.0;
    for i in 0..max_steps {
        let t = i as f64 * h;
        x = rk4_step(rhs, t, &x, h).map_err(|_| Error::IntegrationFailure { t, index: Some(i) })?;
        let next = StateVector(x);
        if !next.is_nonnegative() {
            return Err(Error::IntegrationFailure {
                t: t + h,
                index: Some(i + 1),
            });
        }
        states.push(next);
        if next.x1() < detection_level {
            let above = states[i].x1();
            let frac = (above - detection_level) / (above - next.x1());
            let grid = TimeGrid::new(states.len(), h, 0.0)?;
            let controls = vec![*u_full; states.len()];
            return Ok(MinTimeResult {
                t_final: t + frac * h,
                trajectory: Trajectory::new(grid, states, controls)?,
            });
        }
    }
    Err(Error::TargetNotReached {
        detection_level,
        t_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_start() -> StateVector {
        StateVector::new(30.0, 904.0, 3.4, 0.46)
    }

    #[test]
    fn start_below_level_is_misuse() {
        let x0 = StateVector::new(0.01, 904.0, 3.4, 0.46);
        let err = solve_min_time(
            &x0,
            &ControlVector::new(0.9, 0.0, 0.0, 0.0),
            0.05,
            0.01,
            &ModelParams::default(),
            500.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn no_therapy_never_reaches_target() {
        let err = solve_min_time(
            &paper_start(),
            &ControlVector::zeros(),
            0.05,
            0.05,
            &ModelParams::default(),
            200.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::TargetNotReached { .. }));
    }

    #[test]
    fn trajectory_ends_at_crossing_node() {
        let res = solve_min_time(
            &paper_start(),
            &ControlVector::new(0.9, 0.0, 0.0, 0.0),
            0.05,
            0.05,
            &ModelParams::default(),
            500.0,
        )
        .unwrap();
        let states = &res.trajectory.states;
        let n = states.len();
        assert!(states[n - 1].x1() < 0.05);
        assert!(states[n - 2].x1() >= 0.05);
        let grid = res.trajectory.grid;
        assert!(grid.time(n - 2) <= res.t_final && res.t_final <= grid.time(n - 1));
    }
}
