//! `anchor`: simulate circuits, train TVD predictors, plan shot distributions
//! and run the variability benchmarks from the command line.

mod commands;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use commands::{BenchArgs, PlanArgs, ReportArgs, SimulateArgs, TrainArgs};

#[derive(Parser)]
#[command(name = "anchor", version, about = "Shot distribution across circuit maps and quantum computers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a circuit on one device and print its counts and TVD.
    Simulate(SimulateArgs),
    /// Train one TVD forest per device.
    Train(TrainArgs),
    /// Solve the shot-distribution program for a circuit or a given TVD matrix.
    Plan(PlanArgs),
    /// Run the temporal and spatial variability experiments.
    Bench(BenchArgs),
    /// Summarize run records from CSV files.
    Report(ReportArgs),
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, missing or malformed input files. Exit code 1.
    #[error("{0}")]
    Usage(String),
    /// Anything that fails after the inputs were accepted. Exit code 2.
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("ANCHOR_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("ANCHOR_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(e.into()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = init_threads().and_then(|()| match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Train(a) => commands::train(a),
        Command::Plan(a) => commands::plan(a),
        Command::Bench(a) => commands::bench(a),
        Command::Report(a) => commands::report(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
