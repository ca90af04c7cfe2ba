//! `harpia`: run simulations, check report dumps, print cost estimates and
//! walk through a multi-signature session.
//!
//! Exit status is 0 on success, 1 when the input fails validation and 2 on
//! usage, configuration or I/O errors.

mod cost;
mod demo;
mod simulate;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use harpia_core::Percent;

#[derive(Parser)]
#[command(
    name = "harpia",
    version,
    about = "Credit-based forwarding incentives: simulator and tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write metrics.csv, summary.json and reports.ndjson.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// What to print on stdout.
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Check a report dump against the three credibility criteria.
    ValidateReports {
        dump: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Storage and per-cycle traffic estimates.
    CostEstimate {
        /// Routers.
        #[arg(long)]
        n: usize,
        /// Co-signing threshold in percent, e.g. 87.5.
        #[arg(long)]
        zeta: Percent,
        /// Average neighbors per router, e.g. 5 or 4.5.
        #[arg(long)]
        nu: String,
        /// Report period in seconds.
        #[arg(long, default_value_t = 600)]
        lambda: u64,
        /// Settlement cycle in seconds.
        #[arg(long, default_value_t = 86_400)]
        cycle: u64,
        /// Settlement proposals broadcast per cycle.
        #[arg(long, default_value_t = 1)]
        proposers: usize,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Print a round-by-round transcript of an m-of-n signing session.
    MusigDemo {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        zeta: Percent,
        #[arg(long)]
        message: String,
        /// Number of co-signers; defaults to the minimum the threshold allows.
        #[arg(long)]
        signers: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

/// How a command failed.
#[derive(Debug)]
pub enum Failure {
    /// The input was read fine but did not pass the checks.
    Invalid(String),
    Usage(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HARPIA_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            scenario,
            out,
            seed,
            format,
        } => simulate::run(&scenario, &out, seed, format),
        Command::ValidateReports { dump, format } => validate::run(&dump, format),
        Command::CostEstimate {
            n,
            zeta,
            nu,
            lambda,
            cycle,
            proposers,
            format,
        } => cost::run(n, zeta, &nu, lambda, cycle, proposers, format),
        Command::MusigDemo {
            n,
            zeta,
            message,
            signers,
            seed,
        } => demo::run(n, zeta, &message, signers, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("validation failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
