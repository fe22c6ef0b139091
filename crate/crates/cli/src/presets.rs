//! Scenarios shipped with the binary.

use crate::error::ScenarioError;
use crate::scenario::{parse_scenario, ScenarioSpec};

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub source: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "min-time-paper",
        summary: "minimum time to push x1 below 0.05 under full therapy",
        source: include_str!("../presets/min-time-paper.toml"),
    },
    Preset {
        name: "fixed-tf-paper",
        summary: "quadratic regulator over a 500-day horizon",
        source: include_str!("../presets/fixed-tf-paper.toml"),
    },
    Preset {
        name: "free-tf-paper",
        summary: "quadratic regulator with time charge, horizon starting at 500 days",
        source: include_str!("../presets/free-tf-paper.toml"),
    },
    Preset {
        name: "equilibrium-check",
        summary: "regression fixture starting at the uninfected equilibrium",
        source: include_str!("../presets/equilibrium-check.toml"),
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn load_preset(name: &str) -> Result<ScenarioSpec, ScenarioError> {
    let preset = find(name).ok_or_else(|| ScenarioError::UnknownPreset(name.to_string()))?;
    parse_scenario(preset.source)
}
