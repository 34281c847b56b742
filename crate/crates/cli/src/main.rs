//! `isrc`: design, verify and simulate repetitive controllers under
//! intermittent sampling.
//!
//! Exit codes: 0 when every requested check passes, 1 when the computation ran
//! but a criterion failed (or a run diverged), 2 for invalid input.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "isrc",
    version,
    about = "Repetitive control under intermittent sampling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Base frequency grid size for the stability checks.
    #[arg(long)]
    pub grid_size: Option<usize>,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the nominal design and the intermittent tuning loop.
    Design(CommonArgs),
    /// Check the configured controller against both stability theorems.
    Verify(CommonArgs),
    /// Simulate the configured scenario.
    Simulate(CommonArgs),
    /// Simulate the scenario over seeds, sampling probabilities and gains.
    Sweep(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Design(a) => commands::design(a),
        Command::Verify(a) => commands::verify(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Sweep(a) => commands::sweep(a),
    };
    match result {
        Ok(commands::Status::Pass) => ExitCode::SUCCESS,
        Ok(commands::Status::Fail(msg)) => {
            eprintln!("isrc: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("isrc: invalid input: {e:#}");
            ExitCode::from(2)
        }
    }
}
