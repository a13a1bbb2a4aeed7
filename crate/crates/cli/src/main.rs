//! `bridgefpt`: first-passage-time densities from simulated Brownian bridges.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ConfigArgs;

#[derive(Debug, Parser)]
#[command(name = "bridgefpt", version, about)]
struct Cli {
    /// Base seed for all random streams (key `seed`).
    #[arg(long, global = true, env = "FPT_SEED")]
    seed: Option<u64>,
    /// Worker threads; outputs do not depend on this.
    #[arg(long, global = true, env = "FPT_THREADS")]
    threads: Option<usize>,
    /// Directory for output files.
    #[arg(long = "out-dir", global = true, env = "FPT_OUT_DIR")]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the density and rate function; writes density.csv, rate.csv, meta.json.
    Estimate(ConfigArgs),
    /// Run the oracle checks and print a pass/fail table.
    Validate(commands::ValidateArgs),
    /// Principal eigenvalues and the mixture density; writes eigen.json, density_mixture.csv, tail.json.
    Tail(ConfigArgs),
    /// Direct estimator against Euler + kernel density at matched wall time.
    Compare(ConfigArgs),
    /// Print the unit-diffusion drift and start level of a general diffusion.
    Lamperti(commands::LampertiArgs),
}

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    Config(anyhow::Error),
    Numeric(anyhow::Error),
    ChecksFailed,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::ChecksFailed => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot start {threads} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    let out_dir = cli.out_dir.as_deref();
    let result = match &cli.command {
        Command::Estimate(args) => commands::estimate(args, cli.seed, out_dir),
        Command::Validate(args) => commands::validate(args, cli.seed, out_dir),
        Command::Tail(args) => commands::tail(args, cli.seed, out_dir),
        Command::Compare(args) => commands::compare(args, cli.seed, out_dir),
        Command::Lamperti(args) => commands::lamperti(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Config(err) => eprintln!("config error: {err:#}"),
                CliError::Numeric(err) => eprintln!("numeric failure: {err:#}"),
                CliError::ChecksFailed => eprintln!("validation failed"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}
