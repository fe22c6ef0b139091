//! Uniform time grids and classical fourth-order Runge-Kutta sweeps.
//!
//! States are integrated forward from `x(t0)`, costates backward from
//! `λ(t_f)`. Controls live on the grid nodes and are interpolated linearly
//! for the half-step stages; the backward sweep interpolates stored states
//! the same way.

use nalgebra::SVector;

use crate::error::{Error, Result};
use crate::model::{ControlVector, CostateVector, ModelParams, StateVector, Vec4};
use crate::ocp::{costate_rhs, costate_terminal, CostWeights};

/// `n` equally spaced nodes `t0 + i·h`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub n: usize,
    pub h: f64,
    pub t0: f64,
}

impl TimeGrid {
    pub fn new(n: usize, h: f64, t0: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 2 points, got {n}"
            )));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidInput(format!(
                "grid step must be finite and > 0, got {h}"
            )));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidInput(format!(
                "grid start must be finite, got {t0}"
            )));
        }
        Ok(Self { n, h, t0 })
    }

    /// Grid on `[0, t_final]` with step `h`; `t_final` must be a whole
    /// number of steps.
    pub fn from_horizon(t_final: f64, h: f64) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0 && h.is_finite() && h > 0.0) {
            return Err(Error::InvalidInput(format!(
                "horizon and step must be finite and > 0, got t_final = {t_final}, h = {h}"
            )));
        }
        let steps = (t_final / h).round();
        if steps < 1.0 || ((steps * h) - t_final).abs() > 1e-9 * t_final {
            return Err(Error::InvalidInput(format!(
                "horizon {t_final} is not a whole number of steps of {h}"
            )));
        }
        Self::new(steps as usize + 1, t_final / steps, 0.0)
    }

    /// Grid on `[0, t_final]` with `n` points.
    pub fn with_points(t_final: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 2 points, got {n}"
            )));
        }
        Self::new(n, t_final / (n - 1) as f64, 0.0)
    }

    pub fn t_final(&self) -> f64 {
        self.t0 + (self.n - 1) as f64 * self.h
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.h
    }

    /// Same node count, new step.
    pub fn with_step(&self, h: f64) -> Result<Self> {
        Self::new(self.n, h, self.t0)
    }
}

/// Grid-aligned samples of state, control and (optionally) costate.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<StateVector>,
    pub controls: Vec<ControlVector>,
    pub costates: Option<Vec<CostateVector>>,
}

impl Trajectory {
    pub fn new(
        grid: TimeGrid,
        states: Vec<StateVector>,
        controls: Vec<ControlVector>,
    ) -> Result<Self> {
        let traj = Self {
            grid,
            states,
            controls,
            costates: None,
        };
        traj.check_consistent()?;
        Ok(traj)
    }

    pub fn check_consistent(&self) -> Result<()> {
        let n = self.grid.n;
        if self.states.len() != n {
            return Err(Error::InconsistentTrajectory(format!(
                "{} state samples for {n} grid points",
                self.states.len()
            )));
        }
        if self.controls.len() != n {
            return Err(Error::InconsistentTrajectory(format!(
                "{} control samples for {n} grid points",
                self.controls.len()
            )));
        }
        if let Some(costates) = &self.costates {
            if costates.len() != n {
                return Err(Error::InconsistentTrajectory(format!(
                    "{} costate samples for {n} grid points",
                    costates.len()
                )));
            }
        }
        Ok(())
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.grid.n).map(|i| self.grid.time(i))
    }

    pub fn final_state(&self) -> &StateVector {
        self.states
            .last()
            .expect("trajectory has at least two samples")
    }

    pub fn final_control(&self) -> &ControlVector {
        self.controls
            .last()
            .expect("trajectory has at least two samples")
    }
}

/// One classical RK4 step of `ẏ = f(t, y)` from `t` to `t + h`.
///
/// A negative `h` steps backward. Every stage is checked for finiteness.
pub fn rk4_step<const N: usize, F>(
    mut f: F,
    t: f64,
    y: &SVector<f64, N>,
    h: f64,
) -> Result<SVector<f64, N>>
where
    F: FnMut(f64, &SVector<f64, N>) -> SVector<f64, N>,
{
    let fail = || Error::IntegrationFailure { t, index: None };
    let finite = |v: &SVector<f64, N>| v.iter().all(|c| c.is_finite());
    let half = 0.5 * h;

    let k1 = f(t, y);
    if !finite(&k1) {
        return Err(fail());
    }
    let k2 = f(t + half, &(y + k1 * half));
    if !finite(&k2) {
        return Err(fail());
    }
    let k3 = f(t + half, &(y + k2 * half));
    if !finite(&k3) {
        return Err(fail());
    }
    let k4 = f(t + h, &(y + k3 * h));
    if !finite(&k4) {
        return Err(fail());
    }
    let next = y + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
    if !finite(&next) {
        return Err(fail());
    }
    Ok(next)
}

/// Linear interpolation on the interval `[left, right]` at `frac ∈ [0, 1]`.
fn lerp(left: &Vec4, right: &Vec4, frac: f64) -> Vec4 {
    left + (right - left) * frac
}

/// Forward sweep of the infection model under sampled controls.
pub fn integrate_state(
    controls: &[ControlVector],
    x0: &StateVector,
    grid: TimeGrid,
    p: &ModelParams,
) -> Result<Trajectory> {
    if controls.len() != grid.n {
        return Err(Error::InconsistentTrajectory(format!(
            "{} control samples for {} grid points",
            controls.len(),
            grid.n
        )));
    }
    if !x0.is_finite() || !x0.is_nonnegative() {
        return Err(Error::InvalidInput(format!(
            "initial state must be finite and nonnegative, got {:?}",
            x0.to_array()
        )));
    }
    let mut states = Vec::with_capacity(grid.n);
    states.push(*x0);
    let mut x = x0.0;
    for i in 0..grid.n - 1 {
        let t_i = grid.time(i);
        let (u_left, u_right) = (&controls[i].0, &controls[i + 1].0);
        let rhs = |t: f64, y: &Vec4| {
            let frac = ((t - t_i) / grid.h).clamp(0.0, 1.0);
            let u = ControlVector(lerp(u_left, u_right, frac));
            p.derivative(&StateVector(*y), &u).0
        };
        x = rk4_step(rhs, t_i, &x, grid.h).map_err(|_| Error::IntegrationFailure {
            t: t_i,
            index: Some(i),
        })?;
        let next = StateVector(x);
        if !next.is_nonnegative() {
            return Err(Error::IntegrationFailure {
                t: grid.time(i + 1),
                index: Some(i + 1),
            });
        }
        states.push(next);
    }
    Ok(Trajectory {
        grid,
        states,
        controls: controls.to_vec(),
        costates: None,
    })
}

/// Backward costate sweep from `λ(t_f) = S x(t_f)`.
pub fn integrate_costate(
    mut traj: Trajectory,
    w: &CostWeights,
    p: &ModelParams,
) -> Result<Trajectory> {
    traj.check_consistent()?;
    let grid = traj.grid;
    let n = grid.n;
    let mut costates = vec![CostateVector::zeros(); n];
    costates[n - 1] = costate_terminal(traj.final_state(), w);
    let mut lambda = costates[n - 1].0;
    for i in (0..n - 1).rev() {
        let t_i = grid.time(i);
        let (x_left, x_right) = (&traj.states[i].0, &traj.states[i + 1].0);
        let (u_left, u_right) = (&traj.controls[i].0, &traj.controls[i + 1].0);
        let rhs = |t: f64, l: &Vec4| {
            let frac = ((t - t_i) / grid.h).clamp(0.0, 1.0);
            let x = StateVector(lerp(x_left, x_right, frac));
            let u = ControlVector(lerp(u_left, u_right, frac));
            costate_rhs(&x, &u, &CostateVector(*l), w, p).0
        };
        lambda = rk4_step(rhs, grid.time(i + 1), &lambda, -grid.h).map_err(|_| {
            Error::IntegrationFailure {
                t: grid.time(i + 1),
                index: Some(i + 1),
            }
        })?;
        costates[i] = CostateVector(lambda);
    }
    traj.costates = Some(costates);
    Ok(traj)
}
