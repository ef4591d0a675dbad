//! `trisim` drives the three-qubit simulation core from JSON run configs:
//! parameter derivation, dispersive shift tables, gate propagation,
//! parameter sweeps, and pulse calibration.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use commands::Method;
use config::RunConfig;

/// Exit code 2 marks input problems the user can fix in the config; 3 marks
/// numerical failures encountered while running a valid config.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] trisim_core::Error),
    #[error("{0}")]
    Output(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Core(_) => 3,
            CliError::Output(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "trisim", version, about = "Tunable-coupler three-qubit gate simulator")]
struct Cli {
    /// Path to the JSON run configuration.
    #[arg(long, global = true, default_value = "config.json")]
    config: PathBuf,

    /// Override the output directory from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the RNG seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the per-mode level count from the config.
    #[arg(long, global = true)]
    levels: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce a circuit or bare parameter set to dressed qubit parameters.
    Derive,
    /// Tabulate dispersive shifts by perturbative and exact routes.
    Shifts {
        /// Which routes to evaluate.
        #[arg(long, value_enum, default_value_t = Method::All)]
        method: Method,
    },
    /// Propagate the drive pulse and score the resulting gate.
    Gate,
    /// Evaluate the gate over a parameter grid.
    Sweep {
        /// Worker threads (defaults to the number of cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Optimize free pulse parameters for process fidelity.
    Calibrate,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(&cli.config)?;
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(levels) = cli.levels {
        cfg.levels = levels;
        cfg.validate()?;
    }
    match cli.command {
        Command::Derive => commands::cmd_derive(cfg),
        Command::Shifts { method } => commands::cmd_shifts(cfg, method),
        Command::Gate => commands::cmd_gate(cfg),
        Command::Sweep { jobs } => commands::cmd_sweep(cfg, jobs),
        Command::Calibrate => commands::cmd_calibrate(cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
