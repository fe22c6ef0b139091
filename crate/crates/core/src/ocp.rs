//! Quadratic cost functional, Hamiltonian and first-order conditions.
//!
//! The cost is
//!
//! ```text
//! J = ½ x(tf)ᵀ S x(tf) + T·tf + ∫ ½ (xᵀQx + uᵀRu) dt
//! ```
//!
//! with diagonal `S`, `Q`, `R`, and the Hamiltonian is `H = L + λᵀ f(x, u)`.

use crate::error::{Error, Result};
use crate::model::{ControlVector, CostateVector, ModelParams, StateVector, Vec4};
use crate::ode::Trajectory;

/// Diagonal weights of the quadratic cost plus the per-day time charge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    /// terminal state weight (diagonal)
    pub s: Vec4,
    /// running state weight (diagonal)
    pub q: Vec4,
    /// running control weight (diagonal)
    pub r: Vec4,
    /// cost per day of horizon
    pub time: f64,
}

impl CostWeights {
    /// Penalizes virions, proviral and productive cells (10³ each, terminal and
    /// running) and protease-inhibitor use (0.01); no time charge.
    pub fn baseline() -> Self {
        Self {
            s: Vec4::new(1e3, 0.0, 1e3, 1e3),
            q: Vec4::new(1e3, 0.0, 1e3, 1e3),
            r: Vec4::new(0.01, 0.0, 0.0, 0.0),
            time: 0.0,
        }
    }

    pub fn with_time_weight(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn zero() -> Self {
        Self {
            s: Vec4::zeros(),
            q: Vec4::zeros(),
            r: Vec4::zeros(),
            time: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [("S", &self.s), ("Q", &self.q), ("R", &self.r)];
        for (name, diag) in named {
            for (i, v) in diag.iter().enumerate() {
                if !(v.is_finite() && *v >= 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "{name}[{}] must be finite and >= 0, got {v}",
                        i + 1
                    )));
                }
            }
        }
        if !(self.time.is_finite() && self.time >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "T must be finite and >= 0, got {}",
                self.time
            )));
        }
        Ok(())
    }
}

impl Default for CostWeights {
    fn default() -> Self {
        Self::baseline()
    }
}

/// The three additive parts of the cost functional.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostBreakdown {
    pub terminal: f64,
    pub running: f64,
    pub time: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(terminal: f64, running: f64, time: f64) -> Self {
        Self {
            terminal,
            running,
            time,
            total: terminal + running + time,
        }
    }
}

fn quad(diag: &Vec4, v: &Vec4) -> f64 {
    diag.component_mul(v).dot(v)
}

/// Running cost `½(xᵀQx + uᵀRu)`.
pub fn running_cost(x: &StateVector, u: &ControlVector, w: &CostWeights) -> f64 {
    0.5 * (quad(&w.q, x) + quad(&w.r, u))
}

/// `½ x_fᵀ S x_f + T·t_f`.
pub fn terminal_cost(x_f: &StateVector, t_f: f64, w: &CostWeights) -> f64 {
    0.5 * quad(&w.s, x_f) + w.time * t_f
}

/// Cost of a sampled trajectory; the running integral uses the composite
/// trapezoidal rule on the trajectory grid.
pub fn total_cost(traj: &Trajectory, w: &CostWeights) -> Result<CostBreakdown> {
    traj.check_consistent()?;
    let running = running_integral(traj, w, 0, traj.grid.n - 1);
    let x_f = traj.states.last().expect("grid has at least two nodes");
    let t_f = traj.grid.t_final();
    Ok(CostBreakdown::new(
        0.5 * quad(&w.s, x_f),
        running,
        w.time * (t_f - traj.grid.t0),
    ))
}

/// Trapezoidal integral of the running cost between grid nodes `from..=to`.
pub fn running_integral(traj: &Trajectory, w: &CostWeights, from: usize, to: usize) -> f64 {
    if to <= from {
        return 0.0;
    }
    let integrand = |i: usize| running_cost(&traj.states[i], &traj.controls[i], w);
    let interior: f64 = (from + 1..to).map(integrand).sum();
    traj.grid.h * (0.5 * (integrand(from) + integrand(to)) + interior)
}

/// `H = L(x, u) + λᵀ f(x, u)`.
pub fn hamiltonian(
    x: &StateVector,
    u: &ControlVector,
    lambda: &CostateVector,
    w: &CostWeights,
    p: &ModelParams,
) -> f64 {
    running_cost(x, u, w) + lambda.dot(&p.derivative(x, u))
}

/// `λ̇ = −∂H/∂x = −(Qx + J_xᵀ λ)`.
pub fn costate_rhs(
    x: &StateVector,
    u: &ControlVector,
    lambda: &CostateVector,
    w: &CostWeights,
    p: &ModelParams,
) -> CostateVector {
    let jx = p.state_jacobian(x, u);
    CostateVector(-(w.q.component_mul(x) + jx.tr_mul(lambda)))
}

/// `λ(t_f) = ∇_x K = S x_f`; the time charge has no state gradient.
pub fn costate_terminal(x_f: &StateVector, w: &CostWeights) -> CostateVector {
    CostateVector(w.s.component_mul(x_f))
}

/// `∂H/∂u = Ru + J_uᵀ λ`.
pub fn control_gradient(
    x: &StateVector,
    u: &ControlVector,
    lambda: &CostateVector,
    w: &CostWeights,
    p: &ModelParams,
) -> Vec4 {
    let ju = p.control_jacobian(x, u);
    w.r.component_mul(u) + ju.tr_mul(lambda)
}

/// First-order change of the cost per unit extension of the horizon:
///
/// ```text
/// δJ/δt_f = x_fᵀ S f(x_f, u_f) + ½ (x_fᵀ Q x_f + u_fᵀ R u_f + T)
/// ```
///
/// The ½ multiplies the time weight too; the exact derivative carries `T` in full.
pub fn free_tf_sensitivity(
    x_f: &StateVector,
    u_f: &ControlVector,
    w: &CostWeights,
    p: &ModelParams,
) -> f64 {
    let f = p.derivative(x_f, u_f);
    w.s.component_mul(x_f).dot(&f) + 0.5 * (quad(&w.q, x_f) + quad(&w.r, u_f) + w.time)
}

/// `|H(t_f) + ∂K/∂t_f|`, which vanishes at a free-horizon optimum.
pub fn transversality_residual(
    x_f: &StateVector,
    u_f: &ControlVector,
    w: &CostWeights,
    p: &ModelParams,
) -> f64 {
    let lambda_f = costate_terminal(x_f, w);
    (hamiltonian(x_f, u_f, &lambda_f, w, p) + w.time).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::TimeGrid;
    use approx::assert_relative_eq;

    fn p() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn running_cost_examples() {
        let w = CostWeights::baseline();
        assert_eq!(
            running_cost(&StateVector::zeros(), &ControlVector::zeros(), &w),
            0.0
        );
        assert_eq!(
            running_cost(
                &StateVector::new(1.0, 0.0, 0.0, 0.0),
                &ControlVector::zeros(),
                &w
            ),
            500.0
        );
        let v = running_cost(
            &StateVector::new(4.9, 904.0, 0.34, 0.42),
            &ControlVector::new(0.9, 0.0, 0.0, 0.0),
            &w,
        );
        let oracle = 0.5 * (1e3 * (4.9 * 4.9 + 0.34 * 0.34 + 0.42 * 0.42) + 0.01 * 0.81);
        assert_relative_eq!(v, oracle, max_relative = 1e-14);
        assert_relative_eq!(v, 12151.00405, max_relative = 1e-12);
    }

    #[test]
    fn terminal_cost_examples() {
        let w = CostWeights::baseline().with_time_weight(0.001);
        assert_relative_eq!(terminal_cost(&StateVector::zeros(), 500.0, &w), 0.5);
        let eq = StateVector::new(0.0, 1000.0, 0.0, 0.0);
        assert_eq!(terminal_cost(&eq, 500.0, &CostWeights::baseline()), 0.0);
        let xf = StateVector::new(0.05, 1000.0, 0.1, 0.1);
        assert_relative_eq!(terminal_cost(&xf, 275.0, &w), 11.525, max_relative = 1e-12);
    }

    fn constant_trajectory(x: StateVector, u: ControlVector, grid: TimeGrid) -> Trajectory {
        Trajectory::new(grid, vec![x; grid.n], vec![u; grid.n]).unwrap()
    }

    #[test]
    fn total_cost_of_zero_trajectory_is_time_charge() {
        let grid = TimeGrid::from_horizon(500.0, 0.5).unwrap();
        let traj = constant_trajectory(StateVector::zeros(), ControlVector::zeros(), grid);
        let c = total_cost(&traj, &CostWeights::baseline().with_time_weight(0.001)).unwrap();
        assert_relative_eq!(c.total, 0.5, max_relative = 1e-12);
        assert_eq!(c.running, 0.0);
    }

    #[test]
    fn total_cost_constant_integrand_is_exact() {
        let grid = TimeGrid::from_horizon(10.0, 0.1).unwrap();
        let traj = constant_trajectory(
            StateVector::new(1.0, 0.0, 0.0, 0.0),
            ControlVector::zeros(),
            grid,
        );
        let c = total_cost(&traj, &CostWeights::baseline()).unwrap();
        assert_relative_eq!(c.running, 5000.0, max_relative = 1e-12);
        assert_eq!(c.terminal, 500.0);
        assert_relative_eq!(c.total, 5500.0, max_relative = 1e-12);
        assert_eq!(c.total, c.terminal + c.running + c.time);
    }

    #[test]
    fn total_cost_rejects_mismatched_samples() {
        let grid = TimeGrid::new(5, 1.0, 0.0).unwrap();
        let traj = Trajectory {
            grid,
            states: vec![StateVector::zeros(); 5],
            controls: vec![ControlVector::zeros(); 4],
            costates: None,
        };
        assert!(matches!(
            total_cost(&traj, &CostWeights::baseline()),
            Err(Error::InconsistentTrajectory(_))
        ));
    }

    #[test]
    fn trapezoid_converges_at_second_order() {
        // x1(t) = sin t + 0.3 t on [0, π], integrated against the closed form.
        let err = |n: usize| {
            let grid = TimeGrid::new(n, std::f64::consts::PI / (n - 1) as f64, 0.0).unwrap();
            let states = (0..n)
                .map(|i| StateVector::new(grid.time(i).sin() + 0.3 * grid.time(i), 0.0, 0.0, 0.0))
                .collect();
            let traj = Trajectory::new(grid, states, vec![ControlVector::zeros(); n]).unwrap();
            let c = total_cost(&traj, &CostWeights::baseline()).unwrap();
            // ∫ ½·10³·(sin t + 0.3 t)² dt on [0, π]
            let pi = std::f64::consts::PI;
            let oracle = 500.0 * (pi / 2.0 + 0.6 * pi + 0.09 * pi.powi(3) / 3.0);
            (c.running - oracle).abs()
        };
        let ratio = err(41) / err(81);
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn hamiltonian_examples() {
        let w = CostWeights::baseline();
        let x = StateVector::new(4.9, 904.0, 0.34, 0.42);
        let u = ControlVector::new(0.5, 0.0, 0.0, 0.0);
        assert_eq!(
            hamiltonian(&x, &u, &CostateVector::zeros(), &w, &p()),
            running_cost(&x, &u, &w)
        );
        let h = hamiltonian(
            &StateVector::zeros(),
            &ControlVector::zeros(),
            &CostateVector::new(0.0, 1.0, 0.0, 0.0),
            &CostWeights::zero(),
            &p(),
        );
        assert_eq!(h, 10.0);
        let eq = p().uninfected_equilibrium().unwrap();
        let h = hamiltonian(
            &eq,
            &ControlVector::zeros(),
            &CostateVector::new(3.0, -2.0, 7.0, 1.5),
            &CostWeights::zero(),
            &p(),
        );
        assert!(h.abs() < 1e-9);
    }

    #[test]
    fn costate_rhs_examples() {
        let z = costate_rhs(
            &StateVector::zeros(),
            &ControlVector::zeros(),
            &CostateVector::zeros(),
            &CostWeights::baseline(),
            &p(),
        );
        assert_eq!(z.to_array(), [0.0; 4]);
        let v = costate_rhs(
            &StateVector::zeros(),
            &ControlVector::zeros(),
            &CostateVector::new(1.0, 0.0, 0.0, 0.0),
            &CostWeights::zero(),
            &p(),
        );
        assert_relative_eq!(v[0], 2.4, max_relative = 1e-15);
        assert_eq!(v[1], 0.0);
        assert_eq!(v[2], 0.0);
        assert_relative_eq!(v[3], -288.0, max_relative = 1e-15);
    }

    #[test]
    fn costate_terminal_examples() {
        let w = CostWeights::baseline();
        assert_eq!(
            costate_terminal(&StateVector::zeros(), &w).to_array(),
            [0.0; 4]
        );
        assert_eq!(
            costate_terminal(&StateVector::new(1.0, 1.0, 1.0, 1.0), &w).to_array(),
            [1000.0, 0.0, 1000.0, 1000.0]
        );
    }

    #[test]
    fn control_gradient_examples() {
        let w = CostWeights::baseline();
        let g = control_gradient(
            &StateVector::new(4.9, 904.0, 0.34, 0.42),
            &ControlVector::new(0.5, 0.0, 0.0, 0.0),
            &CostateVector::zeros(),
            &w,
            &p(),
        );
        assert_relative_eq!(g[0], 0.005, max_relative = 1e-14);
        let g = control_gradient(
            &StateVector::new(0.0, 0.0, 0.0, 1.0),
            &ControlVector::zeros(),
            &CostateVector::new(1.0, 0.0, 0.0, 0.0),
            &w,
            &p(),
        );
        assert_relative_eq!(g[0], -288.0, max_relative = 1e-15);
        let g = control_gradient(
            &StateVector::new(30.0, 904.0, 3.4, 0.46),
            &ControlVector::new(0.9, 0.0, 0.0, 0.0),
            &CostateVector::new(0.01, 0.0, 0.0, 0.0),
            &w,
            &p(),
        );
        assert_relative_eq!(g[0], 0.009 - 1.3248, max_relative = 1e-12);
        assert_relative_eq!(g[0], -1.3158, max_relative = 1e-12);
    }

    #[test]
    fn sensitivity_examples() {
        let w = CostWeights::baseline().with_time_weight(0.001);
        let s = free_tf_sensitivity(&StateVector::zeros(), &ControlVector::zeros(), &w, &p());
        assert_relative_eq!(s, 0.0005, max_relative = 1e-14);
        let eq = p().uninfected_equilibrium().unwrap();
        let s = free_tf_sensitivity(&eq, &ControlVector::zeros(), &w, &p());
        assert_relative_eq!(s, 0.0005, max_relative = 1e-9);
    }

    #[test]
    fn sensitivity_reduces_to_half_time_weight() {
        let w = CostWeights::zero().with_time_weight(1.0);
        for x in [
            StateVector::new(30.0, 904.0, 3.4, 0.46),
            StateVector::new(0.0, 12.0, 800.0, 1.0),
        ] {
            let s = free_tf_sensitivity(&x, &ControlVector::new(0.7, 0.0, 0.0, 0.0), &w, &p());
            assert_eq!(s, 0.5);
        }
    }

    #[test]
    fn validation_rejects_negative_weights() {
        let mut w = CostWeights::baseline();
        w.q[2] = -1.0;
        assert!(w.validate().is_err());
        assert!(CostWeights::baseline()
            .with_time_weight(-0.1)
            .validate()
            .is_err());
        assert!(CostWeights::baseline().validate().is_ok());
    }
}
