//! `ilo` — inverse problems with layered generative priors.
//!
//! Subcommands: `gen-model`, `solve`, `bench`, `theory-table`, `srec-test`.
//! Exit codes: 0 success, 2 configuration error, 3 runtime error.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug)]
pub enum AppError {
    Config(String),
    Runtime(String),
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Config(m) => write!(f, "config error: {m}"),
            AppError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "ilo",
    about = "Solve linear inverse problems with layered generative priors and certify measurement ensembles",
    version
)]
struct Cli {
    /// Suppress informational output.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a generator model file and print per-layer Lipschitz bounds.
    GenModel {
        #[arg(long)]
        config: PathBuf,
        /// Output model path.
        #[arg(long)]
        out: PathBuf,
        /// Override the synthesis seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Plant a signal, sense it, and run one recovery; writes a report JSON.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Report path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the solver seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the configured method.
        #[arg(long, value_enum)]
        method: Option<config::Method>,
    },
    /// Paired CSGM/ILO trials over a measurement sweep; writes CSV.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the solver base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Covering-bound, sample-complexity, and chained-cover tables; writes CSVs.
    TheoryTable {
        #[arg(long)]
        config: PathBuf,
        /// Output stem; files are written as `<stem>_bounds.csv` etc.
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo S-REC certification of measurement ensembles; writes JSON.
    SrecTest {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the certification seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> Result<(), AppError> {
    match &cli.command {
        Command::GenModel { config, out, seed } => {
            commands::gen_model(config, out, *seed, cli.quiet)
        }
        Command::Solve {
            config,
            out,
            seed,
            method,
        } => commands::solve(config, out.as_deref(), *seed, *method, cli.quiet),
        Command::Bench { config, out, seed } => commands::bench(config, out, *seed, cli.quiet),
        Command::TheoryTable { config, out } => commands::theory_table(config, out, cli.quiet),
        Command::SrecTest { config, out, seed } => {
            commands::srec_test(config, out.as_deref(), *seed, cli.quiet)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ AppError::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e @ AppError::Runtime(_)) => {
            eprintln!("{e}");
            ExitCode::from(3)
        }
    }
}
