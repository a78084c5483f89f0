//! `macol`: analytic curves, simulations and parameter sweeps for the
//! highway beam-allocation model.
//!
//! Exit codes: 0 on success, 2 for configuration or usage errors, 3 when a
//! run fails.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use macol_core::analytic::AnalyticError;
use macol_core::channel::InterferenceMode;
use macol_core::simulator::{Policy, SimError};
use thiserror::Error;

use crate::commands::Plan;
use crate::config::{parse_config, ConfigError, ExperimentConfig, Sweep};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 3,
        }
    }
}

fn parse_mode(s: &str) -> Result<InterferenceMode, String> {
    match s {
        "geometric" => Ok(InterferenceMode::Geometric),
        "practical" => Ok(InterferenceMode::Practical),
        _ => Err(format!("unknown mode '{s}' (expected geometric or practical)")),
    }
}

#[derive(Debug, Parser)]
#[command(name = "macol", version, about = "Interference-aware mmWave beam allocation on a highway")]
struct Cli {
    /// TOML configuration; absent keys take the reference values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Comma-separated seeds; defaults to the configured seed.
    #[arg(long, global = true, value_delimiter = ',')]
    seed: Vec<u64>,
    /// Comma-separated policies. `simulate` defaults to the configured one,
    /// `sweep` to all three.
    #[arg(long, global = true, value_delimiter = ',')]
    policy: Vec<Policy>,
    /// Interference framework, overriding the config.
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<InterferenceMode>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Service-distance CDFs per activity level and the interfered-area table.
    Analytic,
    /// One run per seed and policy: summaries, time series and merged statistics.
    Simulate,
    /// Cross product of axis values, seeds and policies into one tidy CSV.
    Sweep {
        /// `vehicle_count`, `band_count` or `exploration_s` with its values.
        #[arg(long)]
        sweep: Sweep,
    },
}

fn execute(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let mut config = match &cli.config {
        Some(path) => parse_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(mode) = cli.mode {
        config.mode = mode;
        config.validate()?;
    }
    let seeds = if cli.seed.is_empty() { vec![config.seed] } else { cli.seed };
    let policies = match (&cli.policy[..], &cli.command) {
        ([], Command::Sweep { .. }) => Policy::ALL.to_vec(),
        ([], _) => vec![config.policy],
        (given, _) => given.to_vec(),
    };
    std::fs::create_dir_all(&cli.out)?;
    let plan = Plan {
        config,
        out: cli.out,
        seeds,
        policies,
    };
    match &cli.command {
        Command::Analytic => commands::analytic(&plan),
        Command::Simulate => commands::simulate(&plan),
        Command::Sweep { sweep } => commands::sweep(&plan, sweep),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
