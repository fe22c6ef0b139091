use crate::error::{Error, Result};
use crate::model::{ControlBounds, ControlVector, Vec4};

use super::clip_control;

/// Backtracking step-length selection with an Armijo test on the projected point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    pub initial_step: f64,
    /// multiplicative shrink factor β ∈ (0, 1)
    pub backtrack: f64,
    /// sufficient-decrease constant c ∈ (0, 1)
    pub armijo: f64,
    pub min_step: f64,
}

/// Accepted trial of a line search. `aux` carries whatever the cost
/// evaluator produced alongside the cost (typically the new trajectory).
#[derive(Debug, Clone)]
pub struct LineSearchOutcome<A> {
    pub step: f64,
    pub controls: Vec<ControlVector>,
    pub cost: f64,
    pub aux: A,
}

pub const MIN_STEP: f64 = 1e-12;

impl LineSearch {
    pub fn new(initial_step: f64, backtrack: f64, armijo: f64) -> Self {
        Self {
            initial_step,
            backtrack,
            armijo,
            min_step: MIN_STEP,
        }
    }

    /// Tries `τ = τ0·βᵐ`, `m = 0, 1, ...` and accepts the first projected point
    /// `u⁺ = clip(u − τ g)` with
    ///
    /// ```text
    /// cost(u⁺) ≤ cost(u) − c · weight · Σ_i g_i·(u_i − u⁺_i)
    /// ```
    ///
    /// Without active bounds the decrease term is `c·τ·‖g‖²`. `weight` is the
    /// quadrature weight of one sample (the grid step for control
    /// trajectories). Evaluator integration failures count as rejections.
    pub fn search<A, F>(
        &self,
        controls: &[ControlVector],
        gradient: &[Vec4],
        bounds: &ControlBounds,
        weight: f64,
        current_cost: f64,
        mut cost: F,
    ) -> Result<LineSearchOutcome<A>>
    where
        F: FnMut(&[ControlVector]) -> Result<(f64, A)>,
    {
        if controls.len() != gradient.len() {
            return Err(Error::InvalidInput(format!(
                "{} control samples but {} gradient samples",
                controls.len(),
                gradient.len()
            )));
        }
        if gradient.iter().all(|g| g.iter().all(|&c| c == 0.0)) {
            return Err(Error::InvalidInput(
                "line search along a zero gradient".into(),
            ));
        }
        let mut step = self.initial_step;
        while step >= self.min_step {
            let trial: Vec<ControlVector> = controls
                .iter()
                .zip(gradient)
                .map(|(u, g)| ControlVector(u.0 - g * step))
                .collect();
            let trial = clip_control(&trial, bounds);
            let decrease: f64 = controls
                .iter()
                .zip(&trial)
                .zip(gradient)
                .map(|((u, v), g)| g.dot(&(u.0 - v.0)))
                .sum::<f64>()
                * weight;
            match cost(&trial) {
                Ok((value, aux)) if value <= current_cost - self.armijo * decrease => {
                    return Ok(LineSearchOutcome {
                        step,
                        controls: trial,
                        cost: value,
                        aux,
                    });
                }
                Ok(_) | Err(Error::IntegrationFailure { .. }) => {}
                Err(e) => return Err(e),
            }
            step *= self.backtrack;
        }
        Err(Error::LineSearchFailure {
            tau_min: self.min_step,
        })
    }
}
