use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hivctl::{
    emit_plots, load_preset, load_scenario, presets, run_scenario, PlotOptions, ScenarioSpec,
};

#[derive(Parser)]
#[command(name = "hivctl", version, about = "Optimal HIV therapy scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve scenarios given as files or preset names.
    Run {
        #[arg(required = true)]
        scenarios: Vec<String>,
        /// output root; each run writes to OUT/<name>/
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// also write states.svg and controls.svg
        #[arg(long)]
        plots: bool,
        /// log scale for the virion panel
        #[arg(long)]
        log_x1: bool,
        /// solve the scenarios concurrently
        #[arg(long)]
        batch: bool,
    },
    /// Inspect the shipped presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Show { name: String },
}

fn resolve(arg: &str) -> Result<ScenarioSpec, String> {
    let path = Path::new(arg);
    let spec = if path.is_file() {
        load_scenario(path)
    } else if presets::find(arg).is_some() {
        load_preset(arg)
    } else {
        return Err(format!("{arg}: no such file or preset"));
    };
    spec.map_err(|e| format!("{arg}: {e}"))
}

fn run_one(spec: &ScenarioSpec, out: &Path, opts: Option<PlotOptions>) -> Result<(), String> {
    let (dir, artifacts) = run_scenario(spec, out).map_err(|e| format!("{}: {e}", spec.name))?;
    if let Some(opts) = opts {
        if artifacts.trajectory.is_empty() {
            log::warn!("{}: no trajectory, plots skipped", spec.name);
        } else {
            emit_plots(&artifacts, &dir, opts).map_err(|e| format!("{}: {e}", spec.name))?;
        }
    }
    let s = &artifacts.summary;
    let t_f = s
        .t_final
        .map_or_else(|| "-".to_string(), |t| format!("{t:.3}"));
    println!(
        "{}: {} t_f = {} days, {} iterations, {:.2} s -> {}",
        s.name,
        s.termination,
        t_f,
        s.iterations,
        s.wall_time_s,
        dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Presets {
            action: PresetAction::List,
        } => {
            for p in presets::PRESETS {
                println!("{:<20} {}", p.name, p.summary);
            }
            ExitCode::SUCCESS
        }
        Command::Presets {
            action: PresetAction::Show { name },
        } => match presets::find(&name) {
            Some(p) => {
                print!("{}", p.source);
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("error: unknown preset `{name}`");
                ExitCode::FAILURE
            }
        },
        Command::Run {
            scenarios,
            out,
            plots,
            log_x1,
            batch,
        } => {
            // Every scenario is validated before any solve starts.
            let specs: Result<Vec<_>, _> = scenarios.iter().map(|a| resolve(a)).collect();
            let specs = match specs {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            };
            let opts = plots.then_some(PlotOptions { log_x1 });
            let results: Vec<Result<(), String>> = if batch {
                std::thread::scope(|scope| {
                    let handles: Vec<_> = specs
                        .iter()
                        .map(|spec| scope.spawn(|| run_one(spec, &out, opts)))
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| {
                            h.join()
                                .unwrap_or_else(|_| Err("solver thread panicked".into()))
                        })
                        .collect()
                })
            } else {
                specs.iter().map(|spec| run_one(spec, &out, opts)).collect()
            };
            let mut status = ExitCode::SUCCESS;
            for e in results.into_iter().filter_map(Result::err) {
                eprintln!("error: {e}");
                status = ExitCode::FAILURE;
            }
            status
        }
    }
}
