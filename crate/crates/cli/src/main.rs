//! `ehbf <mode> --config <path> [--out <path>] [--seed <u64>]`

mod commands;
mod config;
mod error;
mod policy_csv;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use crate::commands::Output;
use crate::config::ExperimentConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Solve one instance and write its policy CSV.
    Solve,
    /// Check a policy for feasibility and optimality.
    Verify,
    /// Run a seeded Monte-Carlo sweep.
    Sweep,
    /// Replay a solved policy on a degraded battery.
    Replay,
}

#[derive(Debug, Parser)]
#[command(name = "ehbf", version, about = "Optimal EH + BO beamforming power allocation")]
struct Args {
    #[arg(value_enum)]
    mode: Mode,
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output CSV (defaults to the config's `out`, then stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

/// `EHBF_THREADS`, 0 or unset for one thread per core.
fn thread_limit() -> Result<usize, CliError> {
    match std::env::var("EHBF_THREADS") {
        Ok(v) if v.trim().is_empty() => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("EHBF_THREADS must be a count, got `{v}`"))),
        Err(_) => Ok(0),
    }
}

fn run(args: Args) -> Result<(), CliError> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if args.seed.is_some() {
        config.seed = args.seed;
    }
    let threads = thread_limit()?;
    let out = Output::new(args.out, &config);
    match args.mode {
        Mode::Solve => commands::solve(&config, &out),
        Mode::Verify => commands::verify(&config, &out),
        Mode::Sweep => commands::run_sweep(&config, &out, threads),
        Mode::Replay => commands::replay(&config, &out),
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
