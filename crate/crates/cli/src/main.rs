//! `thermodelay`: certify, simulate, sweep and compute spectra of the
//! delayed thermoelastic rod from a sectioned config file.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 certification failure,
//! 3 numerical failure.

// `!(x > 0.0)` is used on purpose so that NaN falls on the rejecting side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "thermodelay", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the stability conditions, or find the damping threshold when `model.beta` is omitted.
    Certify(RunArgs),
    /// Integrate one trajectory and fit its energy decay rate.
    Simulate(RunArgs),
    /// Run a grid of configurations in parallel.
    Sweep(RunArgs),
    /// Dense spectrum and spectral abscissa of the semi-discrete generator.
    Spectrum(RunArgs),
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Config file (sectioned key = value), or a summary.json to rerun.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Override one setting; repeatable, later values win.
    #[arg(long = "override", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (Command::Certify(args) | Command::Simulate(args) | Command::Sweep(args) | Command::Spectrum(args)) =
        &cli.command;
    let cfg = RunConfig::load(&args.config, &args.overrides)?;
    std::fs::create_dir_all(&args.out)?;
    match cli.command {
        Command::Certify(_) => commands::certify(&cfg, &args.out),
        Command::Simulate(_) => commands::simulate(&cfg, &args.out),
        Command::Sweep(_) => commands::sweep(&cfg, &args.out),
        Command::Spectrum(_) => commands::spectrum(&cfg, &args.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
