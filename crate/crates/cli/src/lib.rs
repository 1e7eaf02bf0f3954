//! Command-line front end: `cancel`, `simulate`, `bench` and
//! `validate-bound`.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod report;

use std::ffi::OsString;

use clap::{Parser, Subcommand};

use crate::commands::{BenchArgs, CancelArgs, SimulateArgs, ValidateBoundArgs};
pub use crate::error::{CliError, Result};

/// Overrides the worker thread count for channel and sweep parallelism.
pub const THREADS_ENV: &str = "PLIC_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "plic",
    version,
    about = "Power-line interference canceller",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Remove interference from a recording.
    Cancel(CancelArgs),
    /// Run a synthetic scenario end to end and report metrics.
    Simulate(SimulateArgs),
    /// Sweep a parameter grid and print an SNR table.
    Bench(BenchArgs),
    /// Check the diagonal-approximation bound over a grid.
    ValidateBound(ValidateBoundArgs),
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::usage(format!(
            "{THREADS_ENV} must be a positive integer, got `{raw}`"
        ))
    })?;
    // Fails only if a pool already exists in this process.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Cancel(a) => commands::cancel(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Bench(a) => commands::bench(a),
        Command::ValidateBound(a) => commands::validate_bound(a),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("plic: {e}");
            e.exit_code()
        }
    }
}
