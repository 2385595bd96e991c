//! `pqsim` experiment runner.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod output;
mod run_config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pqsim::SimError;

#[derive(Parser, Debug)]
#[command(name = "pqsim", version = output::VERSION, about = "Percolation-based sampling of noisy local spin dynamics")]
struct Cli {
    /// Run or model config (JSON). Defaults to the bundled `chain3` preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct AlgoArgs {
    /// Trotter steps; chosen from `--eps` when absent.
    #[arg(long)]
    steps: Option<usize>,
    /// Target Trotter error used to choose the step count.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Acceptance constant: clusters above `c' ln n` are rejected.
    #[arg(long = "c-prime")]
    c_prime: Option<f64>,
    /// Block constant `c` with `exp(-kappa tau) = c`.
    #[arg(long = "tau-c")]
    tau_c: Option<f64>,
    /// Explicit horizontal rate `g`.
    #[arg(long)]
    g: Option<f64>,
    /// Accept fired maps that are not completely positive.
    #[arg(long = "allow-non-cp")]
    allow_non_cp: bool,
    /// Monte Carlo assignments for the conditioned reference.
    #[arg(long = "mc-assignments")]
    mc_assignments: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw samples with the percolation sampler.
    Sample(AlgoArgs),
    /// Compare the sampler with the brute-force conditioned reference.
    OracleCompare(AlgoArgs),
    /// Spanning probabilities and threshold of independent site percolation.
    PercolationScan(commands::PercolationArgs),
    /// Trotter error against the exact evolution over a list of step counts.
    TrotterScan(commands::TrotterScanArgs),
    /// Compression ladder and dissipation-time feasibility tables.
    CoolingDemo(commands::CoolingArgs),
}

#[derive(Debug)]
pub enum CliError {
    Sim(SimError),
    Io(String),
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Sim(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Sim(e) => match e {
                SimError::Config(_)
                | SimError::DimensionMismatch(_)
                | SimError::InvalidOperator(_)
                | SimError::InvalidPovm(_)
                | SimError::Empty(_)
                | SimError::SiteOutOfRange(_)
                | SimError::InvalidModel(_) => 2,
                SimError::Numerical(_) => 4,
                _ => 3,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Sim(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
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

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = commands::Context { config: cli.config, seed: cli.seed, workers: cli.workers.max(1), out: cli.out };
    match cli.command {
        Command::Sample(a) => commands::sample(&ctx, &a),
        Command::OracleCompare(a) => commands::oracle_compare(&ctx, &a),
        Command::PercolationScan(a) => commands::percolation_scan(&ctx, &a),
        Command::TrotterScan(a) => commands::trotter_scan(&ctx, &a),
        Command::CoolingDemo(a) => commands::cooling_demo(&ctx, &a),
    }
}
