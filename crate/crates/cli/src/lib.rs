//! Scenario files, run artifacts and plots for the `hivctl` command.

pub mod artifacts;
pub mod error;
pub mod plot;
pub mod presets;
pub mod scenario;

pub use artifacts::{execute, read_artifacts, run_scenario, RunArtifacts, Summary};
pub use error::{PlotError, RunError, ScenarioError};
pub use plot::{emit_plots, PlotOptions};
pub use presets::{load_preset, PRESETS};
pub use scenario::{load_scenario, parse_scenario, Problem, ScenarioSpec};
