//! `sim` — config-driven runner for the trapped-qubit simulator.
//!
//! Subcommands: constants | rabi | ramsey | echo | sweep. Exit codes:
//! 0 success, 1 I/O failure, 2 invalid configuration, 3 infeasible basis
//! truncation, 4 numerical non-convergence.

mod output;
mod runs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tweezersim::CoreError;

#[derive(Parser)]
#[command(name = "sim", version, about = "Trapped clock-qubit dynamics simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `output.dir`. The SIM_OUT
    /// environment variable overrides both.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also emit a static SVG line plot next to each CSV.
    #[arg(long)]
    plot: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Print derived constants and ground-mode rates; write constants.json.
    Constants(CommonArgs),
    /// Resonantly driven population trace.
    Rabi(CommonArgs),
    /// Ramsey signal vs free-gap time.
    Ramsey(CommonArgs),
    /// Spin-echo signal vs total free-precession time.
    Echo(CommonArgs),
    /// One run of the configured protocol per value of the swept axis.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// depth | temperature | carrier (depth and temperature in μK, carrier
    /// offset from the hyperfine splitting in Hz).
    #[arg(long)]
    axis: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
}

pub(crate) enum CliError {
    Io(String),
    Core(CoreError),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn exit_code_for(err: &CliError) -> u8 {
    match err {
        CliError::Io(_) => 1,
        CliError::Core(e) => match e {
            CoreError::ConfigInvalid(_)
            | CoreError::DetuningTooSmall { .. }
            | CoreError::TimeMismatch { .. }
            | CoreError::DimensionMismatch(_) => 2,
            CoreError::TruncationInfeasible { .. } => 3,
            CoreError::QuadratureNonConvergence(_) | CoreError::StepControlInfeasible { .. } => 4,
        },
    }
}

fn category_for(err: &CliError) -> &'static str {
    match err {
        CliError::Io(_) => "io",
        CliError::Core(e) => match e {
            CoreError::ConfigInvalid(_)
            | CoreError::DetuningTooSmall { .. }
            | CoreError::TimeMismatch { .. }
            | CoreError::DimensionMismatch(_) => "config-invalid",
            CoreError::TruncationInfeasible { .. } => "truncation-infeasible",
            CoreError::QuadratureNonConvergence(_) | CoreError::StepControlInfeasible { .. } => {
                "numerical-nonconvergence"
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Constants(args) => runs::cmd_constants(args),
        Command::Rabi(args) => runs::cmd_run(args, "rabi"),
        Command::Ramsey(args) => runs::cmd_run(args, "ramsey"),
        Command::Echo(args) => runs::cmd_run(args, "echo"),
        Command::Sweep(args) => runs::cmd_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let msg = match &err {
                CliError::Io(m) => m.clone(),
                CliError::Core(e) => e.to_string(),
            };
            eprintln!("error[{}]: {}", category_for(&err), msg);
            ExitCode::from(exit_code_for(&err))
        }
    }
}

pub(crate) use CommonArgs as Common;
pub(crate) use SweepArgs as Sweep;
