mod commands;
mod config;
mod output;

use std::io;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qbridge_core::ErrorCategory;
use thiserror::Error;

use config::{CommonArgs, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] qbridge_core::Error),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e.category() {
                ErrorCategory::Config => 2,
                ErrorCategory::Domain => 3,
                ErrorCategory::Solver => 5,
            },
            CliError::Verification(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

/// Maps Shannon maximum-entropy densities onto Tsallis ones and back.
#[derive(Debug, Parser)]
#[command(name = "qbridge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate g, J, u and both densities on a grid
    Transform {
        #[command(flatten)]
        common: CommonArgs,
        /// min:max:count
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
    },
    /// Solve for the Shannon multipliers matching --target
    SolveShannon {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the consistency checks and report each one
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// Transport residual tolerance
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Draw from the Tsallis density through the Shannon one
    Sample {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Linear, escort and normalized escort averages
    Averages {
        #[command(flatten)]
        common: CommonArgs,
        /// one, identity, square or poly:c0,c1,...
        #[arg(long)]
        observable: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        escort_q: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Transform { common, grid } => commands::transform(&RunConfig::resolve(&common)?, grid.as_deref()),
        Command::SolveShannon { common } => commands::solve(&RunConfig::resolve(&common)?),
        Command::Verify { common, grid, tol } => {
            commands::verify(&RunConfig::resolve(&common)?, grid.as_deref(), tol)
        }
        Command::Sample { common, n, seed } => commands::sample(&RunConfig::resolve(&common)?, n, seed),
        Command::Averages {
            common,
            observable,
            escort_q,
        } => commands::average(&RunConfig::resolve(&common)?, observable.as_deref(), escort_q),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
