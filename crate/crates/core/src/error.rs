use thiserror::Error;

/// Errors raised by the model, integrator and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate model parameters: {0}")]
    DegenerateParameters(String),

    #[error("integration failed at t = {t} (grid index {index:?})")]
    IntegrationFailure { t: f64, index: Option<usize> },

    #[error("inconsistent trajectory: {0}")]
    InconsistentTrajectory(String),

    #[error("line search failed: no step above {tau_min:e} decreased the cost")]
    LineSearchFailure { tau_min: f64 },

    #[error("grid step driven non-positive (h = {h}) by the final-time update")]
    DegenerateGrid { h: f64 },

    #[error("target not reached: x1 stayed above {detection_level} up to t = {t_max}")]
    TargetNotReached { detection_level: f64, t_max: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
