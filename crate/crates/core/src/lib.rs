//! Optimal therapy design for within-host HIV dynamics by the indirect
//! (costate) method.
//!
//! * [`model`]: infection dynamics, parameters and analytic Jacobians.
//! * [`ocp`]: quadratic cost, Hamiltonian, costate dynamics and the
//!   free-horizon sensitivity.
//! * [`ode`]: uniform grids and fixed-step RK4 forward/backward sweeps.
//! * [`solver`]: fixed- and free-horizon steepest descent and the
//!   minimum-time threshold solver.

pub mod error;
pub mod model;
pub mod ocp;
pub mod ode;
pub mod solver;

pub use error::{Error, Result};
pub use model::{ControlBounds, ControlVector, CostateVector, ModelParams, StateVector};
pub use ocp::{CostBreakdown, CostWeights};
pub use ode::{TimeGrid, Trajectory};
pub use solver::{
    solve_fixed_tf, solve_free_tf, solve_min_time, HorizonStep, IterationReport, LqrProblem,
    MinTimeResult, SolveResult, SolverConfig, Termination,
};
