//! `stark`: command-line front end of the verification engine.
//!
//! Settings merge in a fixed order: command-line flag, then configuration
//! file, then built-in default. Exit codes: 0 when every check passed
//! (recorded discrepancies allowed), 1 when any check failed, 2 on a usage
//! error.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{Failure, FileConfig};

#[derive(Parser)]
#[command(
    name = "stark",
    version,
    about = "Exact reconstruction and numerical verification of a regularized Stark system"
)]
pub struct Cli {
    /// Optional `key = value` configuration file; explicit flags win.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run verification suites and report every check.
    Verify(VerifyArgs),
    /// Print a normal form in the canonical grammar.
    Nf(NfArgs),
    /// Describe one leaf of the reduced family at fixed levels.
    Reduce(ReduceArgs),
    /// Integrate the full or reduced flow and write run artifacts.
    Simulate(SimulateArgs),
    /// Emit or check the byte-exact golden files.
    Goldens(GoldensArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    /// The oscillation average.
    First,
    /// The vertical stage on the energy level and the twin spheres.
    Second,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Fixed-step symmetric collocation.
    Gauss,
    /// Adaptive embedded pair.
    Dopri5,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// Comma-separated suite names, or `all`.
    #[arg(long)]
    pub suite: Option<String>,

    #[arg(long, value_enum)]
    pub format: Option<Format>,

    /// Also write the JSON report here.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct NfArgs {
    /// Normal-form order.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub order: Option<u8>,

    #[arg(long, value_enum)]
    pub stage: Option<Stage>,

    #[arg(long, value_enum)]
    pub format: Option<Format>,

    /// Include the term-by-term audit trail.
    #[arg(long)]
    pub audit: bool,
}

#[derive(Args)]
pub struct ReduceArgs {
    /// Oscillator level, an exact rational such as 1 or 3/2.
    #[arg(long, value_name = "RAT")]
    pub h: Option<String>,

    /// Vertical level, an exact rational.
    #[arg(long, value_name = "RAT")]
    pub k: Option<String>,

    /// Print the defining polynomial of the leaf.
    #[arg(long)]
    pub emit_space: bool,

    /// Print the equations of motion in the orbit chart.
    #[arg(long)]
    pub emit_eom: bool,

    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub eps: Option<f64>,

    #[arg(long)]
    pub beta: Option<f64>,

    /// Oscillator level of the initial state.
    #[arg(long)]
    pub h: Option<f64>,

    /// Integration horizon.
    #[arg(long)]
    pub tmax: Option<f64>,

    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,

    /// Seed for the initial state.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Integrate the reduced twin-sphere flow instead of the full one.
    #[arg(long)]
    pub reduced: bool,

    /// Vertical level of a reduced run.
    #[arg(long)]
    pub k: Option<f64>,

    /// Append a normal-form scaling study to the summary.
    #[arg(long)]
    pub scaling: bool,

    /// Output directory for manifest, series and summary.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct GoldensArgs {
    #[command(subcommand)]
    pub action: GoldensAction,
}

#[derive(Subcommand)]
pub enum GoldensAction {
    /// Write the golden files from the engine.
    Emit {
        #[arg(long, value_name = "DIR")]
        dir: Option<PathBuf>,
    },
    /// Compare the stored golden files against the engine.
    Check {
        #[arg(long, value_name = "DIR")]
        dir: Option<PathBuf>,
    },
}

fn dispatch(command: Command, file: &FileConfig) -> Result<i32, Failure> {
    match command {
        Command::Verify(args) => commands::verify_cmd(args, file),
        Command::Nf(args) => commands::nf_cmd(args, file),
        Command::Reduce(args) => commands::reduce_cmd(args, file),
        Command::Simulate(args) => commands::simulate_cmd(args, file),
        Command::Goldens(args) => commands::goldens_cmd(args.action, file),
    }
}

fn main() {
    let cli = Cli::parse();
    let file = match &cli.config {
        Some(path) => FileConfig::load(path),
        None => Ok(FileConfig::empty()),
    };
    let outcome = file.and_then(|f| dispatch(cli.command, &f));
    let code = match outcome {
        Ok(code) => code,
        Err(fail) => {
            eprintln!("error: {:#}", fail.error());
            fail.exit_code()
        }
    };
    std::process::exit(code);
}
