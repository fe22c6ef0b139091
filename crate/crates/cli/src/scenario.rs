//! Scenario files.
//!
//! A scenario is a TOML document. Top-level keys:
//!
//! | key               | required              | meaning                                   |
//! |-------------------|-----------------------|-------------------------------------------|
//! | `name`            | yes                   | output subdirectory name                  |
//! | `problem`         | yes                   | `min-time`, `fixed-tf` or `free-tf`       |
//! | `detection_level` | iff `min-time`        | virion threshold ending the min-time run  |
//!
//! Tables, all optional:
//!
//! * `[initial_state]` `x1`..`x4`. Defaults (30, 904, 3.4, 0.46) for min-time,
//!   (4.9, 904, 0.34, 0.42) otherwise.
//! * `[model]` `a1`..`a9` overrides of the default rate constants.
//! * `[weights]` `S`, `Q`, `R` (4-element diagonals) and `T` (free-tf only,
//!   default 0.001). Diagonals default to 10³ on x1, x3, x4 for `S` and `Q` and
//!   0.01 on u1 for `R`. Not allowed for min-time.
//! * `[bounds]` `lower`, `upper` (4-element). Default `[0,0,0,0]` to
//!   `[0.9,0,0,0]`. The min-time solver applies `upper` as full therapy.
//! * `[grid]` any two of `t_final`, `step`, `points` (all three if
//!   consistent). Defaults: 150 days at 0.01 for min-time, where `t_final` is
//!   the search horizon; 500 days at 0.05 otherwise.
//! * `[solver]` `max_iterations`, `tol_control`, `tol_cost`, `initial_step`,
//!   `backtrack`, `armijo`, `h_update_period`, `h_step` or
//!   `target_reduction`, `tol_tf`. Not allowed for min-time.
//!
//! Unknown keys are errors.

use std::fmt;
use std::path::Path;

use hivctl_core::model::Vec4;
use hivctl_core::{
    ControlBounds, ControlVector, CostWeights, HorizonStep, ModelParams, SolverConfig, StateVector,
    TimeGrid,
};
use serde::Deserialize;

use crate::error::ScenarioError;

pub const PAPER_TIME_WEIGHT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Problem {
    MinTime { detection_level: f64 },
    FixedTf,
    FreeTf,
}

impl Problem {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::MinTime { .. } => "min-time",
            Self::FixedTf => "fixed-tf",
            Self::FreeTf => "free-tf",
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Fully resolved scenario: every default applied and every value checked.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub problem: Problem,
    pub x0: StateVector,
    pub params: ModelParams,
    pub weights: CostWeights,
    pub bounds: ControlBounds,
    /// initial grid; for min-time, `t_final` is the search horizon
    pub grid: TimeGrid,
    pub solver: SolverConfig,
}

#[derive(Debug, Deserialize, Clone, Copy, PartialEq)]
#[serde(rename_all = "kebab-case")]
enum ProblemKind {
    MinTime,
    FixedTf,
    FreeTf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    problem: Option<ProblemKind>,
    detection_level: Option<f64>,
    initial_state: Option<RawState>,
    model: Option<RawModel>,
    weights: Option<RawWeights>,
    bounds: Option<RawBounds>,
    grid: Option<RawGrid>,
    solver: Option<RawSolver>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawState {
    x1: Option<f64>,
    x2: Option<f64>,
    x3: Option<f64>,
    x4: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    a1: Option<f64>,
    a2: Option<f64>,
    a3: Option<f64>,
    a4: Option<f64>,
    a5: Option<f64>,
    a6: Option<f64>,
    a7: Option<f64>,
    a8: Option<f64>,
    a9: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeights {
    #[serde(rename = "S")]
    s: Option<[f64; 4]>,
    #[serde(rename = "Q")]
    q: Option<[f64; 4]>,
    #[serde(rename = "R")]
    r: Option<[f64; 4]>,
    #[serde(rename = "T")]
    t: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBounds {
    lower: Option<[f64; 4]>,
    upper: Option<[f64; 4]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    t_final: Option<f64>,
    step: Option<f64>,
    points: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    max_iterations: Option<usize>,
    tol_control: Option<f64>,
    tol_cost: Option<f64>,
    initial_step: Option<f64>,
    backtrack: Option<f64>,
    armijo: Option<f64>,
    h_update_period: Option<usize>,
    h_step: Option<f64>,
    target_reduction: Option<f64>,
    tol_tf: Option<f64>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn finite(key: &str, v: f64) -> Result<f64, ScenarioError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ScenarioError::invalid(
            key,
            format!("must be finite, got {v}"),
        ))
    }
}

fn finite4(key: &str, v: [f64; 4]) -> Result<Vec4, ScenarioError> {
    for (i, c) in v.iter().enumerate() {
        finite(&format!("{key}[{}]", i + 1), *c)?;
    }
    Ok(Vec4::from(v))
}

fn core_invalid(key: &str) -> impl Fn(hivctl_core::Error) -> ScenarioError + '_ {
    move |e| match e {
        hivctl_core::Error::InvalidInput(m) => ScenarioError::invalid(key, m),
        other => ScenarioError::invalid(key, other.to_string()),
    }
}

/// Reads and resolves a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioSpec, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text)
}

/// Parses and resolves scenario text.
pub fn parse_scenario(text: &str) -> Result<ScenarioSpec, ScenarioError> {
    let de = toml::Deserializer::parse(text).map_err(|e| ScenarioError::Parse {
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        message: e.message().trim().to_string(),
    })?;
    let raw: RawScenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        let inner = e.into_inner();
        ScenarioError::Key {
            key,
            line: inner.span().map_or(1, |s| line_of(text, s.start)),
            message: inner.message().trim().to_string(),
        }
    })?;
    resolve(raw)
}

fn resolve(raw: RawScenario) -> Result<ScenarioSpec, ScenarioError> {
    let name = raw
        .name
        .ok_or_else(|| ScenarioError::Missing("name".into()))?;
    if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
        return Err(ScenarioError::invalid(
            "name",
            "must be a non-empty plain file name",
        ));
    }
    let kind = raw
        .problem
        .ok_or_else(|| ScenarioError::Missing("problem".into()))?;
    let min_time = kind == ProblemKind::MinTime;

    let problem = match (kind, raw.detection_level) {
        (ProblemKind::MinTime, Some(level)) => {
            if finite("detection_level", level)? <= 0.0 {
                return Err(ScenarioError::invalid("detection_level", "must be > 0"));
            }
            Problem::MinTime {
                detection_level: level,
            }
        }
        (ProblemKind::MinTime, None) => {
            return Err(ScenarioError::Missing("detection_level".into()))
        }
        (_, Some(_)) => {
            return Err(ScenarioError::invalid(
                "detection_level",
                "only allowed for min-time problems",
            ))
        }
        (ProblemKind::FixedTf, None) => Problem::FixedTf,
        (ProblemKind::FreeTf, None) => Problem::FreeTf,
    };

    let x0 = resolve_state(raw.initial_state, min_time)?;
    let params = resolve_model(raw.model)?;
    let weights = resolve_weights(raw.weights, problem)?;
    let bounds = resolve_bounds(raw.bounds)?;
    let grid = resolve_grid(raw.grid, min_time)?;
    let solver = resolve_solver(raw.solver, min_time)?;

    if let Problem::MinTime { detection_level } = problem {
        if x0.x1() <= detection_level {
            return Err(ScenarioError::invalid(
                "initial_state.x1",
                format!("must exceed detection_level {detection_level}"),
            ));
        }
    }

    Ok(ScenarioSpec {
        name,
        problem,
        x0,
        params,
        weights,
        bounds,
        grid,
        solver,
    })
}

fn resolve_state(raw: Option<RawState>, min_time: bool) -> Result<StateVector, ScenarioError> {
    let default = if min_time {
        [30.0, 904.0, 3.4, 0.46]
    } else {
        [4.9, 904.0, 0.34, 0.42]
    };
    let Some(raw) = raw else {
        return Ok(StateVector::from_array(default));
    };
    let given = [raw.x1, raw.x2, raw.x3, raw.x4];
    let mut x = default;
    for i in 0..4 {
        if let Some(v) = given[i] {
            let key = format!("initial_state.x{}", i + 1);
            if finite(&key, v)? < 0.0 {
                return Err(ScenarioError::invalid(
                    key,
                    format!("must be >= 0, got {v}"),
                ));
            }
            x[i] = v;
        }
    }
    Ok(StateVector::from_array(x))
}

fn resolve_model(raw: Option<RawModel>) -> Result<ModelParams, ScenarioError> {
    let mut p = ModelParams::default();
    let Some(raw) = raw else {
        return Ok(p);
    };
    let slots = [
        (&mut p.a1, raw.a1),
        (&mut p.a2, raw.a2),
        (&mut p.a3, raw.a3),
        (&mut p.a4, raw.a4),
        (&mut p.a5, raw.a5),
        (&mut p.a6, raw.a6),
        (&mut p.a7, raw.a7),
        (&mut p.a8, raw.a8),
        (&mut p.a9, raw.a9),
    ];
    for (i, (slot, v)) in slots.into_iter().enumerate() {
        if let Some(v) = v {
            let key = format!("model.a{}", i + 1);
            if finite(&key, v)? <= 0.0 {
                return Err(ScenarioError::invalid(key, format!("must be > 0, got {v}")));
            }
            *slot = v;
        }
    }
    Ok(p)
}

fn resolve_weights(
    raw: Option<RawWeights>,
    problem: Problem,
) -> Result<CostWeights, ScenarioError> {
    let mut w = CostWeights::baseline();
    match problem {
        Problem::MinTime { .. } => {
            if raw.is_some() {
                return Err(ScenarioError::invalid(
                    "weights",
                    "min-time problems have no quadratic cost",
                ));
            }
            return Ok(CostWeights::zero());
        }
        Problem::FreeTf => w.time = PAPER_TIME_WEIGHT,
        Problem::FixedTf => {}
    }
    let Some(raw) = raw else {
        return Ok(w);
    };
    for (key, slot, v) in [
        ("weights.S", &mut w.s, raw.s),
        ("weights.Q", &mut w.q, raw.q),
        ("weights.R", &mut w.r, raw.r),
    ] {
        if let Some(v) = v {
            let diag = finite4(key, v)?;
            if diag.iter().any(|c| *c < 0.0) {
                return Err(ScenarioError::invalid(key, "entries must be >= 0"));
            }
            *slot = diag;
        }
    }
    if let Some(t) = raw.t {
        if problem != Problem::FreeTf {
            return Err(ScenarioError::invalid(
                "weights.T",
                "the time weight is only meaningful for free-tf problems",
            ));
        }
        if finite("weights.T", t)? < 0.0 {
            return Err(ScenarioError::invalid(
                "weights.T",
                format!("must be >= 0, got {t}"),
            ));
        }
        w.time = t;
    }
    Ok(w)
}

fn resolve_bounds(raw: Option<RawBounds>) -> Result<ControlBounds, ScenarioError> {
    let default = ControlBounds::default();
    let Some(raw) = raw else {
        return Ok(default);
    };
    let lower = match raw.lower {
        Some(v) => ControlVector(finite4("bounds.lower", v)?),
        None => *default.lower(),
    };
    let upper = match raw.upper {
        Some(v) => ControlVector(finite4("bounds.upper", v)?),
        None => *default.upper(),
    };
    ControlBounds::new(lower, upper).map_err(core_invalid("bounds"))
}

fn resolve_grid(raw: Option<RawGrid>, min_time: bool) -> Result<TimeGrid, ScenarioError> {
    let (default_tf, default_h) = if min_time {
        (150.0, 0.01)
    } else {
        (500.0, 0.05)
    };
    let (mut tf, mut h, points) = match raw {
        Some(g) => (g.t_final, g.step, g.points),
        None => (None, None, None),
    };
    if let Some(v) = tf {
        if finite("grid.t_final", v)? <= 0.0 {
            return Err(ScenarioError::invalid(
                "grid.t_final",
                format!("must be > 0, got {v}"),
            ));
        }
    }
    if let Some(v) = h {
        if finite("grid.step", v)? <= 0.0 {
            return Err(ScenarioError::invalid(
                "grid.step",
                format!("must be > 0, got {v}"),
            ));
        }
    }
    if let Some(n) = points {
        if n < 2 {
            return Err(ScenarioError::invalid(
                "grid.points",
                "need at least 2 points",
            ));
        }
    }
    let given = [tf.is_some(), h.is_some(), points.is_some()]
        .iter()
        .filter(|b| **b)
        .count();
    if given < 2 && tf.is_none() {
        tf = Some(default_tf);
    }
    if given < 2 && points.is_none() && h.is_none() {
        h = Some(default_h);
    }
    let grid = match (tf, h, points) {
        (Some(tf), Some(h), None) => TimeGrid::from_horizon(tf, h),
        (Some(tf), None, Some(n)) => TimeGrid::with_points(tf, n),
        (None, Some(h), Some(n)) => TimeGrid::new(n, h, 0.0),
        (Some(tf), Some(h), Some(n)) => {
            let g = TimeGrid::new(n, h, 0.0).map_err(core_invalid("grid"))?;
            if (g.t_final() - tf).abs() > 1e-9 * tf {
                return Err(ScenarioError::invalid(
                    "grid",
                    format!(
                        "t_final {tf} disagrees with (points - 1) * step = {}",
                        g.t_final()
                    ),
                ));
            }
            Ok(g)
        }
        _ => unreachable!("defaults leave at least two grid fields set"),
    };
    grid.map_err(core_invalid("grid"))
}

fn resolve_solver(raw: Option<RawSolver>, min_time: bool) -> Result<SolverConfig, ScenarioError> {
    let mut cfg = SolverConfig::default();
    let Some(raw) = raw else {
        return Ok(cfg);
    };
    if min_time {
        return Err(ScenarioError::invalid(
            "solver",
            "min-time problems are solved without iteration",
        ));
    }
    if let Some(v) = raw.max_iterations {
        cfg.max_iterations = v;
    }
    if let Some(v) = raw.h_update_period {
        cfg.h_update_period = v;
    }
    for (key, slot, v) in [
        ("solver.tol_control", &mut cfg.tol_control, raw.tol_control),
        ("solver.tol_cost", &mut cfg.tol_cost, raw.tol_cost),
        (
            "solver.initial_step",
            &mut cfg.initial_step,
            raw.initial_step,
        ),
        ("solver.backtrack", &mut cfg.backtrack, raw.backtrack),
        ("solver.armijo", &mut cfg.armijo, raw.armijo),
        ("solver.tol_tf", &mut cfg.tol_tf, raw.tol_tf),
    ] {
        if let Some(v) = v {
            *slot = finite(key, v)?;
        }
    }
    cfg.horizon_step = match (raw.h_step, raw.target_reduction) {
        (Some(_), Some(_)) => {
            return Err(ScenarioError::invalid(
                "solver",
                "h_step and target_reduction are mutually exclusive",
            ))
        }
        (Some(v), None) => HorizonStep::Absolute(finite("solver.h_step", v)?),
        (None, Some(v)) => HorizonStep::Relative(finite("solver.target_reduction", v)?),
        (None, None) => cfg.horizon_step,
    };
    cfg.validate().map_err(core_invalid("solver"))?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(text: &str) -> ScenarioError {
        parse_scenario(text).unwrap_err()
    }

    #[test]
    fn minimal_fixed_tf_takes_defaults() {
        let s = parse_scenario("name = \"a\"\nproblem = \"fixed-tf\"\n").unwrap();
        assert_eq!(s.problem, Problem::FixedTf);
        assert_eq!(s.x0.to_array(), [4.9, 904.0, 0.34, 0.42]);
        assert_eq!(s.weights, CostWeights::baseline());
        assert_eq!((s.grid.n, s.grid.h), (10_001, 0.05));
        assert_eq!(s.solver, SolverConfig::default());
    }

    #[test]
    fn free_tf_gets_time_weight() {
        let s = parse_scenario("name = \"a\"\nproblem = \"free-tf\"\n").unwrap();
        assert_eq!(s.weights.time, PAPER_TIME_WEIGHT);
        let s =
            parse_scenario("name = \"a\"\nproblem = \"free-tf\"\n[weights]\nT = 0.5\n").unwrap();
        assert_eq!(s.weights.time, 0.5);
    }

    #[test]
    fn unknown_key_is_named_with_path_and_line() {
        let e = err("name = \"a\"\nproblem = \"fixed-tf\"\n[weights]\nZ = 1.0\n");
        match e {
            ScenarioError::Key { key, line, .. } => {
                assert_eq!(key, "weights.Z");
                assert_eq!(line, 4);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err("name = \"a\"\nproblem = \"fixed-tf\"\nbogus = 1\n")
            .to_string()
            .contains("bogus"));
    }

    #[test]
    fn syntax_error_reports_line() {
        match err("name = \"a\"\n\n[grid\n") {
            ScenarioError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn problem_specific_fields() {
        assert!(matches!(
            err("name = \"a\"\nproblem = \"min-time\"\n"),
            ScenarioError::Missing(k) if k == "detection_level"
        ));
        assert!(matches!(
            err("name = \"a\"\nproblem = \"fixed-tf\"\ndetection_level = 0.05\n"),
            ScenarioError::Invalid { key, .. } if key == "detection_level"
        ));
        assert!(matches!(
            err("name = \"a\"\nproblem = \"fixed-tf\"\n[weights]\nT = 0.1\n"),
            ScenarioError::Invalid { key, .. } if key == "weights.T"
        ));
        assert!(
            matches!(err("problem = \"fixed-tf\"\n"), ScenarioError::Missing(k) if k == "name")
        );
    }

    #[test]
    fn non_finite_values_name_the_key() {
        let e = err("name = \"a\"\nproblem = \"fixed-tf\"\n[initial_state]\nx3 = nan\n");
        assert!(matches!(e, ScenarioError::Invalid { key, .. } if key == "initial_state.x3"));
        let e = err("name = \"a\"\nproblem = \"fixed-tf\"\n[weights]\nQ = [1.0, inf, 0.0, 0.0]\n");
        assert!(matches!(e, ScenarioError::Invalid { key, .. } if key == "weights.Q[2]"));
    }

    #[test]
    fn grid_combinations() {
        let g = |body: &str| {
            parse_scenario(&format!(
                "name = \"a\"\nproblem = \"fixed-tf\"\n[grid]\n{body}"
            ))
            .map(|s| (s.grid.n, s.grid.h))
        };
        assert_eq!(g("t_final = 10.0\nstep = 0.5\n").unwrap(), (21, 0.5));
        assert_eq!(g("t_final = 10.0\npoints = 11\n").unwrap(), (11, 1.0));
        assert_eq!(g("step = 2.0\npoints = 6\n").unwrap(), (6, 2.0));
        assert_eq!(g("step = 1.0\n").unwrap(), (501, 1.0));
        assert!(g("t_final = 10.0\nstep = 0.5\npoints = 5\n").is_err());
        assert!(g("t_final = 10.0\nstep = 0.3\n").is_err());
        assert!(g("step = -1.0\n").is_err());
    }

    #[test]
    fn solver_overrides() {
        let s = parse_scenario(
            "name = \"a\"\nproblem = \"free-tf\"\n[solver]\nmax_iterations = 7\ntarget_reduction = 0.1\n",
        )
        .unwrap();
        assert_eq!(s.solver.max_iterations, 7);
        assert_eq!(s.solver.horizon_step, HorizonStep::Relative(0.1));
        assert!(parse_scenario(
            "name = \"a\"\nproblem = \"fixed-tf\"\n[solver]\nbacktrack = 2.0\n"
        )
        .is_err());
        assert!(parse_scenario("name = \"a\"\nproblem = \"min-time\"\ndetection_level = 0.05\n[solver]\ntol_tf = 1.0\n").is_err());
    }
}
