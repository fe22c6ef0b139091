use std::path::PathBuf;

use thiserror::Error;

/// Scenario loading failures. Every variant names where the problem is.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{key}: {message} (line {line})")]
    Key {
        key: String,
        line: usize,
        message: String,
    },

    #[error("{key}: {message}")]
    Invalid { key: String, message: String },

    #[error("missing required field `{0}`")]
    Missing(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

impl ScenarioError {
    pub(crate) fn invalid(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invalid {
            key: key.into(),
            message: message.into(),
        }
    }
}

/// Failures while running a scenario or writing its artifacts.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Table {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: malformed table: {message}")]
    Malformed { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Summary {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },

    #[error("solver error: {0}")]
    Solver(#[from] hivctl_core::Error),

    #[error("plot: {0}")]
    Plot(#[from] PlotError),
}

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("nothing to plot: the trajectory is empty")]
    EmptyInput,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
