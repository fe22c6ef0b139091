use log::{debug, info};

use crate::error::{Error, Result};
use crate::model::ControlVector;
use crate::ocp::{free_tf_sensitivity, total_cost, transversality_residual, CostBreakdown};
use crate::ode::{integrate_costate, integrate_state, TimeGrid, Trajectory};

use super::{
    bound_violation, control_gradients, HorizonStep, IterationReport, LqrProblem, SolveResult,
    SolverConfig, Termination, MIN_SENSITIVITY,
};

/// Current iterate of the descent: controls, forward trajectory and its cost.
struct Iterate {
    traj: Trajectory,
    cost: CostBreakdown,
}

impl Iterate {
    fn evaluate(problem: &LqrProblem, controls: &[ControlVector], grid: TimeGrid) -> Result<Self> {
        let traj = integrate_state(controls, &problem.x0, grid, &problem.params)?;
        let cost = total_cost(&traj, &problem.weights)?;
        Ok(Self { traj, cost })
    }
}

enum StepOutcome {
    Accepted { change: f64, decrease: f64 },
    Stalled,
}

struct Descent<'a, S> {
    problem: &'a LqrProblem,
    cfg: &'a SolverConfig,
    free_horizon: bool,
    sink: S,
    history: Vec<IterationReport>,
    last_step: Option<f64>,
    cost_tolerance: f64,
}

impl<'a, S: FnMut(&IterationReport)> Descent<'a, S> {
    fn new(problem: &'a LqrProblem, cfg: &'a SolverConfig, free_horizon: bool, sink: S) -> Self {
        Self {
            problem,
            cfg,
            free_horizon,
            sink,
            history: Vec::new(),
            last_step: None,
            cost_tolerance: 0.0,
        }
    }

    fn report(&mut self, it: &Iterate, gradient_norm: f64, step: f64) {
        let transversality = self.free_horizon.then(|| {
            transversality_residual(
                it.traj.final_state(),
                it.traj.final_control(),
                &self.problem.weights,
                &self.problem.params,
            )
        });
        let report = IterationReport {
            iteration: self.history.len(),
            cost: it.cost,
            step,
            gradient_norm,
            t_final: it.traj.grid.t_final(),
            transversality,
            bound_violation: bound_violation(&it.traj.controls, &self.problem.bounds),
        };
        debug!(
            "iter {:4}  J = {:.10e}  tau = {:.3e}  |g| = {:.3e}  tf = {:.3}",
            report.iteration, report.cost.total, step, gradient_norm, report.t_final
        );
        (self.sink)(&report);
        self.history.push(report);
    }

    /// Costate sweep, gradient evaluation and one projected line-search step.
    fn step(&mut self, it: &mut Iterate) -> Result<StepOutcome> {
        let with_costates =
            integrate_costate(it.traj.clone(), &self.problem.weights, &self.problem.params)?;
        let gradient = control_gradients(&with_costates, self.problem)?;
        it.traj = with_costates;
        let gradient_norm = gradient.iter().map(|g| g.amax()).fold(0.0, f64::max);
        if gradient_norm == 0.0 {
            self.report(it, 0.0, 0.0);
            return Ok(StepOutcome::Accepted {
                change: 0.0,
                decrease: 0.0,
            });
        }

        let mut search = self.cfg.line_search();
        if let Some(prev) = self.last_step {
            search.initial_step = self.cfg.initial_step.min(4.0 * prev);
        }
        let grid = it.traj.grid;
        let problem = self.problem;
        let outcome = search.search(
            &it.traj.controls,
            &gradient,
            &problem.bounds,
            grid.h,
            it.cost.total,
            |trial| {
                let next = Iterate::evaluate(problem, trial, grid)?;
                Ok((next.cost.total, next))
            },
        );
        let outcome = match outcome {
            Ok(o) => o,
            Err(Error::LineSearchFailure { .. }) => return Ok(StepOutcome::Stalled),
            Err(e) => return Err(e),
        };
        let change = it
            .traj
            .controls
            .iter()
            .zip(&outcome.controls)
            .map(|(a, b)| (a.0 - b.0).amax())
            .fold(0.0, f64::max);
        let decrease = it.cost.total - outcome.cost;
        self.last_step = Some(outcome.step);
        *it = outcome.aux;
        self.report(it, gradient_norm, outcome.step);
        Ok(StepOutcome::Accepted { change, decrease })
    }

    fn converged(&self, change: f64, decrease: f64) -> Option<Termination> {
        if change < self.cfg.tol_control {
            Some(Termination::ConvergedByControl)
        } else if decrease < self.cost_tolerance {
            Some(Termination::ConvergedByCost)
        } else {
            None
        }
    }

    /// Moves the horizon by the grid-length rule, keeping control samples on
    /// their node indices. Returns the applied `Δt_f`.
    fn update_horizon(&mut self, it: &mut Iterate) -> Result<f64> {
        let grid = it.traj.grid;
        let sensitivity = free_tf_sensitivity(
            it.traj.final_state(),
            it.traj.final_control(),
            &self.problem.weights,
            &self.problem.params,
        );
        if sensitivity.abs() < MIN_SENSITIVITY {
            debug!("sensitivity {sensitivity:e} too small, horizon kept");
            return Ok(0.0);
        }
        let numerator = match self.cfg.horizon_step {
            HorizonStep::Absolute(tau_h) => tau_h,
            HorizonStep::Relative(fraction) => fraction * it.cost.total,
        };
        let segments = (grid.n - 1) as f64;
        let dh = -numerator / (segments * sensitivity);
        if grid.h + dh <= 0.0 {
            return Err(Error::DegenerateGrid { h: grid.h + dh });
        }

        // Keep the logged cost monotone: shrink the move until it does not
        // raise the cost, and give up after a few halvings.
        let mut scale = 1.0;
        for _ in 0..20 {
            let new_grid = grid.with_step(grid.h + scale * dh)?;
            match Iterate::evaluate(self.problem, &it.traj.controls, new_grid) {
                Ok(next) if next.cost.total <= it.cost.total => {
                    let applied = new_grid.t_final() - grid.t_final();
                    info!(
                        "horizon {:.4} -> {:.4} days (dJ/dtf = {sensitivity:.4e})",
                        grid.t_final(),
                        new_grid.t_final()
                    );
                    *it = next;
                    return Ok(applied);
                }
                Ok(_) | Err(Error::IntegrationFailure { .. }) => scale *= 0.5,
                Err(e) => return Err(e),
            }
        }
        debug!("horizon move rejected: every trial raised the cost");
        Ok(0.0)
    }

    fn finish(self, it: Iterate, termination: Termination) -> Result<SolveResult> {
        let trajectory = match it.traj.costates {
            Some(_) => it.traj,
            None => integrate_costate(it.traj, &self.problem.weights, &self.problem.params)?,
        };
        info!(
            "{} after {} iterations, J = {:.10e}, tf = {:.4}",
            termination,
            self.history.len() - 1,
            it.cost.total,
            trajectory.grid.t_final()
        );
        Ok(SolveResult {
            trajectory,
            history: self.history,
            termination,
        })
    }

    fn start(&mut self, controls: &[ControlVector], grid: TimeGrid) -> Result<Iterate> {
        self.cfg.validate()?;
        self.problem.weights.validate()?;
        if controls.len() != grid.n {
            return Err(Error::InconsistentTrajectory(format!(
                "{} initial control samples for {} grid points",
                controls.len(),
                grid.n
            )));
        }
        if let Some(i) = controls
            .iter()
            .position(|u| !self.problem.bounds.contains(u))
        {
            return Err(Error::InvalidInput(format!(
                "initial control sample {i} lies outside the bounds"
            )));
        }
        debug!(
            "control Hessian diagonal R = {:?}",
            self.problem.weights.r.as_slice()
        );
        let mut it = Iterate::evaluate(self.problem, controls, grid)?;
        self.cost_tolerance = self.cfg.tol_cost * it.cost.total.abs();
        it.traj = integrate_costate(it.traj, &self.problem.weights, &self.problem.params)?;
        let g = control_gradients(&it.traj, self.problem)?;
        let norm = g.iter().map(|g| g.amax()).fold(0.0, f64::max);
        self.report(&it, norm, 0.0);
        Ok(it)
    }
}

/// Steepest descent on the sampled control over a fixed horizon.
///
/// Each iteration integrates the state forward, the costate backward,
/// evaluates `∂H/∂u` at every node and takes a projected step
/// `u ← clip(u − τ ∂H/∂u)` with `τ` chosen by backtracking. Iteration reports
/// go to `sink` as they are produced.
pub fn solve_fixed_tf<S>(
    problem: &LqrProblem,
    grid: TimeGrid,
    cfg: &SolverConfig,
    initial_controls: &[ControlVector],
    sink: S,
) -> Result<SolveResult>
where
    S: FnMut(&IterationReport),
{
    let mut descent = Descent::new(problem, cfg, false, sink);
    let mut it = descent.start(initial_controls, grid)?;
    for _ in 0..cfg.max_iterations {
        match descent.step(&mut it)? {
            StepOutcome::Stalled => return descent.finish(it, Termination::LineSearchFailure),
            StepOutcome::Accepted { change, decrease } => {
                if let Some(done) = descent.converged(change, decrease) {
                    return descent.finish(it, done);
                }
            }
        }
    }
    descent.finish(it, Termination::IterationLimit)
}

/// Steepest descent with a free horizon.
///
/// The node count stays fixed; every `h_update_period` descent iterations the
/// grid step is moved against `δJ/δt_f`. The run stops once the descent has
/// converged and the most recent horizon move was below `tol_tf`.
pub fn solve_free_tf<S>(
    problem: &LqrProblem,
    grid: TimeGrid,
    cfg: &SolverConfig,
    initial_controls: &[ControlVector],
    sink: S,
) -> Result<SolveResult>
where
    S: FnMut(&IterationReport),
{
    let mut descent = Descent::new(problem, cfg, true, sink);
    let mut it = descent.start(initial_controls, grid)?;
    let mut since_update = 0;
    for _ in 0..cfg.max_iterations {
        let (change, decrease) = match descent.step(&mut it)? {
            StepOutcome::Stalled => return descent.finish(it, Termination::LineSearchFailure),
            StepOutcome::Accepted { change, decrease } => (change, decrease),
        };
        since_update += 1;
        let converged = descent.converged(change, decrease);
        if since_update >= cfg.h_update_period || converged.is_some() {
            since_update = 0;
            let moved = descent.update_horizon(&mut it)?;
            if let Some(done) = converged {
                if moved.abs() < cfg.tol_tf {
                    return descent.finish(it, done);
                }
            }
        }
    }
    descent.finish(it, Termination::IterationLimit)
}
