//! Solving a scenario and the files a run leaves behind.
//!
//! `DIR/<name>/trajectory.csv` has columns `t, x1..x4, u1..u4,
//! lambda1..lambda4` (costate cells empty for min-time runs),
//! `iterations.csv` has one row per iteration report, and `summary.toml`
//! records the outcome. Numbers are written with 17 significant digits so the
//! tables re-load exactly.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hivctl_core::{
    solve_fixed_tf, solve_free_tf, solve_min_time, solver::initial_guess, Error as CoreError,
    IterationReport, LqrProblem, SolveResult, Trajectory,
};
use log::info;
use serde::{Deserialize, Serialize};

use crate::error::RunError;
use crate::scenario::{Problem, ScenarioSpec};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const ITERATIONS_FILE: &str = "iterations.csv";
pub const SUMMARY_FILE: &str = "summary.toml";

const TRAJECTORY_HEADER: [&str; 13] = [
    "t", "x1", "x2", "x3", "x4", "u1", "u2", "u3", "u4", "lambda1", "lambda2", "lambda3", "lambda4",
];
const ITERATION_HEADER: [&str; 10] = [
    "iteration",
    "cost_total",
    "cost_terminal",
    "cost_running",
    "cost_time",
    "step",
    "gradient_norm",
    "t_final",
    "transversality",
    "bound_violation",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x: [f64; 4],
    pub u: [f64; 4],
    pub lambda: Option<[f64; 4]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRow {
    pub iteration: usize,
    pub cost_total: f64,
    pub cost_terminal: f64,
    pub cost_running: f64,
    pub cost_time: f64,
    pub step: f64,
    pub gradient_norm: f64,
    pub t_final: f64,
    pub transversality: Option<f64>,
    pub bound_violation: f64,
}

impl From<&IterationReport> for IterationRow {
    fn from(r: &IterationReport) -> Self {
        Self {
            iteration: r.iteration,
            cost_total: r.cost.total,
            cost_terminal: r.cost.terminal,
            cost_running: r.cost.running,
            cost_time: r.cost.time,
            step: r.step,
            gradient_norm: r.gradient_norm,
            t_final: r.t_final,
            transversality: r.transversality,
            bound_violation: r.bound_violation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSummary {
    pub terminal: f64,
    pub running: f64,
    pub time: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub problem: String,
    /// `target-reached` / `target-not-reached` for min-time, otherwise the
    /// descent termination reason
    pub termination: String,
    pub converged: bool,
    pub t_final: Option<f64>,
    pub iterations: usize,
    pub transversality_initial: Option<f64>,
    pub transversality_final: Option<f64>,
    pub wall_time_s: f64,
    pub cost: Option<CostSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub trajectory: Vec<TrajectoryRow>,
    pub iterations: Vec<IterationRow>,
    pub summary: Summary,
}

fn trajectory_rows(traj: &Trajectory) -> Vec<TrajectoryRow> {
    (0..traj.grid.n)
        .map(|i| TrajectoryRow {
            t: traj.grid.time(i),
            x: traj.states[i].to_array(),
            u: traj.controls[i].to_array(),
            lambda: traj.costates.as_ref().map(|l| l[i].to_array()),
        })
        .collect()
}

/// Solves the scenario in memory.
pub fn execute(spec: &ScenarioSpec) -> Result<RunArtifacts, RunError> {
    let started = Instant::now();
    let mut summary = Summary {
        name: spec.name.clone(),
        problem: spec.problem.to_string(),
        termination: String::new(),
        converged: false,
        t_final: None,
        iterations: 0,
        transversality_initial: None,
        transversality_final: None,
        wall_time_s: 0.0,
        cost: None,
    };

    let (trajectory, iterations) = match spec.problem {
        Problem::MinTime { detection_level } => {
            let outcome = solve_min_time(
                &spec.x0,
                spec.bounds.upper(),
                detection_level,
                spec.grid.h,
                &spec.params,
                spec.grid.t_final(),
            );
            match outcome {
                Ok(res) => {
                    summary.termination = "target-reached".into();
                    summary.converged = true;
                    summary.t_final = Some(res.t_final);
                    (trajectory_rows(&res.trajectory), Vec::new())
                }
                Err(CoreError::TargetNotReached { .. }) => {
                    summary.termination = "target-not-reached".into();
                    (Vec::new(), Vec::new())
                }
                Err(e) => return Err(e.into()),
            }
        }
        Problem::FixedTf | Problem::FreeTf => {
            let problem = LqrProblem {
                x0: spec.x0,
                params: spec.params,
                weights: spec.weights,
                bounds: spec.bounds,
            };
            let u0 = initial_guess(&spec.bounds, spec.grid.n);
            let res: SolveResult = if spec.problem == Problem::FreeTf {
                solve_free_tf(&problem, spec.grid, &spec.solver, &u0, |_| {})?
            } else {
                solve_fixed_tf(&problem, spec.grid, &spec.solver, &u0, |_| {})?
            };
            let last = res.final_report();
            summary.termination = res.termination.to_string();
            summary.converged = res.termination.is_converged();
            summary.t_final = Some(res.trajectory.grid.t_final());
            summary.iterations = last.iteration;
            summary.transversality_initial = res.history[0].transversality;
            summary.transversality_final = last.transversality;
            summary.cost = Some(CostSummary {
                terminal: last.cost.terminal,
                running: last.cost.running,
                time: last.cost.time,
                total: last.cost.total,
            });
            (
                trajectory_rows(&res.trajectory),
                res.history.iter().map(IterationRow::from).collect(),
            )
        }
    };
    summary.wall_time_s = started.elapsed().as_secs_f64();
    info!(
        "{}: {} (t_f = {:?}) in {:.3} s",
        spec.name, summary.termination, summary.t_final, summary.wall_time_s
    );
    Ok(RunArtifacts {
        trajectory,
        iterations,
        summary,
    })
}

/// Solves the scenario and writes its artifacts to `out/<name>/`, which is
/// returned alongside the in-memory tables.
pub fn run_scenario(spec: &ScenarioSpec, out: &Path) -> Result<(PathBuf, RunArtifacts), RunError> {
    let artifacts = execute(spec)?;
    let dir = out.join(&spec.name);
    write_artifacts(&artifacts, &dir)?;
    Ok((dir, artifacts))
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn table_err(path: &Path) -> impl Fn(csv::Error) -> RunError + '_ {
    move |source| RunError::Table {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_artifacts(artifacts: &RunArtifacts, dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_trajectory(&artifacts.trajectory, &dir.join(TRAJECTORY_FILE))?;
    write_iterations(&artifacts.iterations, &dir.join(ITERATIONS_FILE))?;
    let path = dir.join(SUMMARY_FILE);
    let text = toml::to_string(&artifacts.summary).expect("summary serializes to TOML");
    fs::write(&path, text).map_err(io_err(&path))
}

pub fn write_trajectory(rows: &[TrajectoryRow], path: &Path) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path).map_err(table_err(path))?;
    w.write_record(TRAJECTORY_HEADER).map_err(table_err(path))?;
    for r in rows {
        let mut rec: Vec<String> = Vec::with_capacity(13);
        rec.push(num(r.t));
        rec.extend(r.x.iter().chain(&r.u).map(|&v| num(v)));
        match r.lambda {
            Some(l) => rec.extend(l.iter().map(|&v| num(v))),
            None => rec.extend(std::iter::repeat_n(String::new(), 4)),
        }
        w.write_record(&rec).map_err(table_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_iterations(rows: &[IterationRow], path: &Path) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path).map_err(table_err(path))?;
    w.write_record(ITERATION_HEADER).map_err(table_err(path))?;
    for r in rows {
        w.write_record([
            r.iteration.to_string(),
            num(r.cost_total),
            num(r.cost_terminal),
            num(r.cost_running),
            num(r.cost_time),
            num(r.step),
            num(r.gradient_norm),
            num(r.t_final),
            r.transversality.map(num).unwrap_or_default(),
            num(r.bound_violation),
        ])
        .map_err(table_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_records(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>, RunError> {
    let mut r = csv::Reader::from_path(path).map_err(table_err(path))?;
    let found = r.headers().map_err(table_err(path))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(RunError::Malformed {
            path: path.to_path_buf(),
            message: format!("unexpected header {:?}", found.iter().collect::<Vec<_>>()),
        });
    }
    r.records()
        .collect::<Result<_, _>>()
        .map_err(table_err(path))
}

fn cell<T: std::str::FromStr>(
    path: &Path,
    rec: &csv::StringRecord,
    i: usize,
) -> Result<T, RunError> {
    rec[i].parse().map_err(|_| RunError::Malformed {
        path: path.to_path_buf(),
        message: format!("bad number {:?} in column {}", &rec[i], i + 1),
    })
}

fn optional_cell(path: &Path, rec: &csv::StringRecord, i: usize) -> Result<Option<f64>, RunError> {
    if rec[i].is_empty() {
        Ok(None)
    } else {
        cell(path, rec, i).map(Some)
    }
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>, RunError> {
    read_records(path, &TRAJECTORY_HEADER)?
        .iter()
        .map(|rec| {
            let four = |from: usize| -> Result<[f64; 4], RunError> {
                Ok([
                    cell(path, rec, from)?,
                    cell(path, rec, from + 1)?,
                    cell(path, rec, from + 2)?,
                    cell(path, rec, from + 3)?,
                ])
            };
            Ok(TrajectoryRow {
                t: cell(path, rec, 0)?,
                x: four(1)?,
                u: four(5)?,
                lambda: if rec[9].is_empty() {
                    None
                } else {
                    Some(four(9)?)
                },
            })
        })
        .collect()
}

pub fn read_iterations(path: &Path) -> Result<Vec<IterationRow>, RunError> {
    read_records(path, &ITERATION_HEADER)?
        .iter()
        .map(|rec| {
            Ok(IterationRow {
                iteration: cell(path, rec, 0)?,
                cost_total: cell(path, rec, 1)?,
                cost_terminal: cell(path, rec, 2)?,
                cost_running: cell(path, rec, 3)?,
                cost_time: cell(path, rec, 4)?,
                step: cell(path, rec, 5)?,
                gradient_norm: cell(path, rec, 6)?,
                t_final: cell(path, rec, 7)?,
                transversality: optional_cell(path, rec, 8)?,
                bound_violation: cell(path, rec, 9)?,
            })
        })
        .collect()
}

pub fn read_summary(path: &Path) -> Result<Summary, RunError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    toml::from_str(&text).map_err(|source| RunError::Summary {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads every artifact from a run directory.
pub fn read_artifacts(dir: &Path) -> Result<RunArtifacts, RunError> {
    Ok(RunArtifacts {
        trajectory: read_trajectory(&dir.join(TRAJECTORY_FILE))?,
        iterations: read_iterations(&dir.join(ITERATIONS_FILE))?,
        summary: read_summary(&dir.join(SUMMARY_FILE))?,
    })
}
