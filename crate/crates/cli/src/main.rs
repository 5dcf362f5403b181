//! `jscc`: design linear joint source-channel codes from a TOML problem file.
//!
//! Exit codes: 0 success, 1 bad input or failed run, 2 solver did not
//! converge (outputs still written), 3 some sweep cells failed.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn input(e: jscc_core::error::Error) -> Self {
        Self { code: 1, message: e.to_string() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn nonconvergence(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn partial(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

#[derive(Debug, Parser)]
#[command(name = "jscc", version, about = "Linear joint source-channel code design")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Problem description (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads for sweeps (default: available cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides `sim.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for K, synthesize C and D, write design.json and summary.txt.
    Design(Common),
    /// Distortion over the SNR and delay lists, written to sweep.csv.
    Sweep(Common),
    /// OPTA bound over the SNR list, written to opta.csv.
    Opta(Common),
    /// Monte Carlo check of a design.json, written to sim.json.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Design file produced by `jscc design`.
        #[arg(long)]
        design: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    let ctx = |c: Common| commands::Context::new(&c.config, c.out, c.jobs, c.seed);
    match cli.command {
        Command::Design(c) => commands::cmd_design(&ctx(c)?),
        Command::Sweep(c) => commands::cmd_sweep(&ctx(c)?),
        Command::Opta(c) => commands::cmd_opta(&ctx(c)?),
        Command::Simulate { common, design } => commands::cmd_simulate(&ctx(common)?, &design),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
