//! `stein`: run experiments, self-checks and immigration-death traces.
//!
//! Exit status is 0 on success, 1 when a check or bound comparison fails,
//! and 2 for configuration or input errors.

mod config;
mod experiments;
mod output;
mod verify;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stein_poisson::carrier::Configuration;
use stein_poisson::imdeath::{simulate_spatial_imdeath, SpatialIntensity};

use config::{load_config, Overrides, RunMode};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Library(stein_poisson::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Library(e) => write!(f, "{e}"),
        }
    }
}

impl From<stein_poisson::Error> for CliError {
    fn from(e: stein_poisson::Error) -> Self {
        CliError::Library(e)
    }
}

#[derive(Parser)]
#[command(name = "stein", version, about = "Poisson process approximation bounds and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one named self-check suite and print a JSON report.
    Verify {
        /// univariate, metrics, palm, imdeath, models, bounds or all
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Monte Carlo replications for the sampling checks.
        #[arg(long, default_value_t = 4000)]
        reps: usize,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the experiment described by a JSON config file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for `<experiment>.csv` and `<experiment>.json`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<RunMode>,
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Simulate the spatial immigration-death process with uniform immigration on the unit cube.
    Trace {
        /// Total immigration rate.
        #[arg(long)]
        mass: f64,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long)]
        horizon: f64,
        #[arg(long)]
        seed: u64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Verify { suite, seed, reps, out } => {
            if reps == 0 {
                return Err(CliError::Config("--reps must be at least 1".into()));
            }
            let report = verify::run_suite(&suite, seed, reps)?;
            for c in &report.checks {
                eprintln!("{} {}", if c.passed { "PASS" } else { "FAIL" }, c.name);
            }
            let text = serde_json::to_string_pretty(&report).expect("report is plain data") + "\n";
            emit(&text, out.as_ref())?;
            Ok(report.passed)
        }
        Command::Experiment { config, seed, out, mode, reps } => {
            let (cfg, out) = load_config(&config)?.resolve(&Overrides { seed, reps, mode, out })?;
            let table = experiments::run(&cfg)?;
            let (csv, json) = output::write_experiment(&cfg, &table, &out)?;
            eprintln!("wrote {} and {}", csv.display(), json.display());
            if table.violations > 0 {
                eprintln!("{} row(s) violate their bound", table.violations);
            }
            Ok(table.violations == 0)
        }
        Command::Trace { mass, dim, horizon, seed, out } => {
            let intensity = SpatialIntensity::uniform(dim, mass)?;
            let traj = simulate_spatial_imdeath(&Configuration::empty(), &intensity, horizon, seed)?;
            emit(&traj.to_csv(), out.as_ref())?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("stein: {e}");
            ExitCode::from(2)
        }
    }
}
