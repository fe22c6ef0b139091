//! Solver drivers: steepest descent on sampled controls for fixed and free
//! horizons, and the threshold-crossing minimum-time solver.

mod descent;
mod line_search;
mod min_time;

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{ControlBounds, ControlVector, ModelParams, StateVector, Vec4};
use crate::ocp::{control_gradient, CostBreakdown, CostWeights};
use crate::ode::Trajectory;

pub use descent::{solve_fixed_tf, solve_free_tf};
pub use line_search::{LineSearch, LineSearchOutcome, MIN_STEP};
pub use min_time::{solve_min_time, MinTimeResult};

/// Sensitivities below this magnitude skip the horizon update.
pub const MIN_SENSITIVITY: f64 = 1e-9;

/// How the horizon is moved at each grid-length update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HorizonStep {
    /// `h ← h − τ_h / ((n−1)·δJ/δt_f)`, i.e. `Δt_f = −τ_h / (δJ/δt_f)`.
    Absolute(f64),
    /// `Δt_f = −ρ·J / (δJ/δt_f)`: aim for a fractional cost reduction `ρ`.
    Relative(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// stop when `max |u⁽ᵏ⁺¹⁾ − u⁽ᵏ⁾| < tol_control`
    pub tol_control: f64,
    /// stop when `J⁽ᵏ⁾ − J⁽ᵏ⁺¹⁾ < tol_cost · J⁽⁰⁾`
    pub tol_cost: f64,
    pub initial_step: f64,
    pub backtrack: f64,
    pub armijo: f64,
    /// descent iterations between grid-length updates (free horizon only)
    pub h_update_period: usize,
    pub horizon_step: HorizonStep,
    /// horizon considered settled once `|Δt_f|` drops below this (days)
    pub tol_tf: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            tol_control: 1e-4,
            tol_cost: 1e-12,
            initial_step: 1e4,
            backtrack: 0.5,
            armijo: 1e-4,
            h_update_period: 5,
            horizon_step: HorizonStep::Absolute(0.1),
            tol_tf: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!(
                    "{name} must be finite and > 0, got {v}"
                )))
            }
        };
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!(
                    "{name} must lie in (0, 1), got {v}"
                )))
            }
        };
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput("max_iterations must be >= 1".into()));
        }
        if self.h_update_period == 0 {
            return Err(Error::InvalidInput("h_update_period must be >= 1".into()));
        }
        positive("tol_control", self.tol_control)?;
        positive("tol_cost", self.tol_cost)?;
        positive("tol_tf", self.tol_tf)?;
        positive("initial_step", self.initial_step)?;
        unit("backtrack", self.backtrack)?;
        unit("armijo", self.armijo)?;
        match self.horizon_step {
            HorizonStep::Absolute(v) => positive("h_step", v),
            HorizonStep::Relative(v) => positive("target_reduction", v),
        }
    }

    pub fn line_search(&self) -> LineSearch {
        LineSearch::new(self.initial_step, self.backtrack, self.armijo)
    }
}

/// Everything but the grid and the initial guess.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqrProblem {
    pub x0: StateVector,
    pub params: ModelParams,
    pub weights: CostWeights,
    pub bounds: ControlBounds,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationReport {
    pub iteration: usize,
    pub cost: CostBreakdown,
    /// accepted descent step τ(k); zero for the initial evaluation
    pub step: f64,
    /// `max |∂H/∂u|` over the grid and the active channels
    pub gradient_norm: f64,
    pub t_final: f64,
    /// `|H(t_f) + ∂K/∂t_f|`, free-horizon runs only
    pub transversality: Option<f64>,
    /// largest distance of any control sample outside the bounds
    pub bound_violation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ConvergedByControl,
    ConvergedByCost,
    IterationLimit,
    LineSearchFailure,
}

impl Termination {
    pub fn is_converged(&self) -> bool {
        matches!(self, Self::ConvergedByControl | Self::ConvergedByCost)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ConvergedByControl => "converged-by-control",
            Self::ConvergedByCost => "converged-by-cost",
            Self::IterationLimit => "iteration-limit",
            Self::LineSearchFailure => "line-search-failure",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// final iterate, costates filled
    pub trajectory: Trajectory,
    pub history: Vec<IterationReport>,
    pub termination: Termination,
}

impl SolveResult {
    pub fn final_report(&self) -> &IterationReport {
        self.history
            .last()
            .expect("history holds at least the initial evaluation")
    }
}

/// Componentwise projection of every sample onto the bounds.
pub fn clip_control(samples: &[ControlVector], bounds: &ControlBounds) -> Vec<ControlVector> {
    samples.iter().map(|u| bounds.clamp(u)).collect()
}

/// Largest componentwise distance of any sample outside the bounds.
pub fn bound_violation(samples: &[ControlVector], bounds: &ControlBounds) -> f64 {
    samples
        .iter()
        .flat_map(|u| {
            (0..4).map(move |c| {
                (bounds.lower()[c] - u[c])
                    .max(u[c] - bounds.upper()[c])
                    .max(0.0)
            })
        })
        .fold(0.0, f64::max)
}

/// Constant guess at the middle of each channel's interval.
pub fn initial_guess(bounds: &ControlBounds, n: usize) -> Vec<ControlVector> {
    let mid = ControlVector(0.5 * (bounds.lower().0 + bounds.upper().0));
    vec![mid; n]
}

/// `∂H/∂u` at every node; pinned channels are reported as zero.
pub fn control_gradients(traj: &Trajectory, problem: &LqrProblem) -> Result<Vec<Vec4>> {
    let costates = traj.costates.as_ref().ok_or_else(|| {
        Error::InconsistentTrajectory("costates are required for the control gradient".into())
    })?;
    traj.check_consistent()?;
    Ok(traj
        .states
        .iter()
        .zip(&traj.controls)
        .zip(costates)
        .map(|((x, u), l)| {
            let mut g = control_gradient(x, u, l, &problem.weights, &problem.params);
            for c in 0..4 {
                if problem.bounds.is_pinned(c) {
                    g[c] = 0.0;
                }
            }
            g
        })
        .collect())
}

/// Fraction of grid nodes satisfying the box-constrained stationarity test on
/// every active channel: interior with `|∂H/∂u| ≤ tol`, or at a bound with the
/// gradient pointing out of the box (within `tol`).
pub fn stationarity_fraction(
    controls: &[ControlVector],
    gradients: &[Vec4],
    bounds: &ControlBounds,
    tol: f64,
) -> f64 {
    let active: Vec<usize> = bounds.active_channels().collect();
    let ok = controls
        .iter()
        .zip(gradients)
        .filter(|(u, g)| {
            active.iter().all(|&c| {
                let at_upper = u[c] >= bounds.upper()[c];
                let at_lower = u[c] <= bounds.lower()[c];
                if at_upper {
                    g[c] <= tol
                } else if at_lower {
                    g[c] >= -tol
                } else {
                    g[c].abs() <= tol
                }
            })
        })
        .count();
    ok as f64 / controls.len().max(1) as f64
}
