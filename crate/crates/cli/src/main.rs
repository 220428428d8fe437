use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use barostab::commands::{self, resolve_out};
use barostab::config::{load_json, CompareConfig, DecayExpectations, EvolveConfig, ScenarioConfig, SteadyConfig, Suite, SweepConfig};
use barostab::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "barostab", version, about = "Steady states and relative-energy decay of radially symmetric compressible flows")]
struct Cli {
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory (overridden by BAROSTAB_OUT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// JSON configuration file.
    #[arg(long, conflicts_with = "scenario")]
    config: Option<PathBuf>,

    /// Named scenario from the suite file.
    #[arg(long)]
    scenario: Option<String>,

    #[arg(long, default_value = "scenarios/paper-suite.json")]
    suite: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a steady problem and write profile.csv and steady_report.json.
    Steady {
        #[command(flatten)]
        source: Source,
    },
    /// Run an evolution and write trajectory.csv, snapshots and decay_report.json.
    Evolve {
        #[command(flatten)]
        source: Source,
        /// Seeds the phase of the initial perturbation.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recompute the decay report from a trajectory CSV.
    Verify {
        #[arg(long)]
        trajectory: PathBuf,
        /// Evolution config supplying the transient window and thresholds.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Transient window (overrides the config).
        #[arg(long)]
        transient: Option<f64>,
    },
    /// Run a parameter sweep and write sweep.csv and sweep_report.json.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare flat and curved steady profiles for increasing inner radii.
    Compare {
        #[command(flatten)]
        source: Source,
    },
}

/// Loads either `--config` or the named scenario, which must be of the kind
/// `pick` accepts.
fn resolve<T: for<'de> serde::Deserialize<'de>>(
    source: &Source,
    kind: &str,
    pick: impl Fn(ScenarioConfig) -> Option<T>,
) -> CliResult<T> {
    match (&source.config, &source.scenario) {
        (Some(path), _) => load_json(path),
        (None, Some(name)) => {
            let suite = Suite::load(&source.suite)?;
            let scenario = suite.get(name)?.clone();
            pick(scenario.config).ok_or_else(|| CliError::Config(format!("scenario {name:?} is not a {kind} scenario")))
        }
        (None, None) => Err(CliError::Config("either --config or --scenario is required".into())),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let out = resolve_out(cli.out);
    match cli.command {
        Command::Steady { source } => {
            let cfg: SteadyConfig = resolve(&source, "steady", |c| match c {
                ScenarioConfig::Steady { config } => Some(config),
                _ => None,
            })?;
            let report = commands::cmd_steady(&cfg, &out)?;
            print_json(&report)?;
        }
        Command::Evolve { source, seed } => {
            let cfg: EvolveConfig = resolve(&source, "evolve", |c| match c {
                ScenarioConfig::Evolve { config } => Some(config),
                _ => None,
            })?;
            let report = commands::cmd_evolve(&cfg, Some(&out), seed)?;
            print_json(&report)?;
        }
        Command::Verify { trajectory, config, transient } => {
            let mut criteria = match config {
                Some(path) => {
                    let cfg: EvolveConfig = load_json(&path)?;
                    cfg.expectations.criteria(&cfg.run)
                }
                None => DecayExpectations::default().with_transient(0.0),
            };
            if let Some(t) = transient {
                criteria.transient = t;
            }
            let report = commands::cmd_verify(Path::new(&trajectory), &criteria, &out)?;
            print_json(&report)?;
        }
        Command::Sweep { source, seed } => {
            let cfg: SweepConfig = resolve(&source, "sweep", |c| match c {
                ScenarioConfig::Sweep { config } => Some(config),
                _ => None,
            })?;
            let report = commands::cmd_sweep(&cfg, &out, seed)?;
            print_json(&report)?;
        }
        Command::Compare { source } => {
            let cfg: CompareConfig = resolve(&source, "compare", |c| match c {
                ScenarioConfig::Compare { config } => Some(config),
                _ => None,
            })?;
            let report = commands::cmd_compare(&cfg, &out)?;
            print_json(&report)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err.downcast_ref::<CliError>().map_or(1, CliError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
