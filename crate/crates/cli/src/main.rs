#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod settings;

use std::fs;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Output;
use crate::error::CliError;
use crate::settings::{Flags, Format};

/// Capacity, achievable rates and decoder simulation for DNA storage.
#[derive(Debug, Parser)]
#[command(name = "dnarate", version)]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Channel capacity for (c, beta, p).
    Capacity,
    /// Achievable outer rate for (K, R_ix, R_in).
    Rate,
    /// Rates over a sweep of K, R_in, c or p, as CSV.
    Curve,
    /// Best (R_ix, R_in, R_out) for block size K.
    Optimize,
    /// End-to-end decoding trials.
    Simulate,
    /// Decode a channel dump written by `simulate --dump`.
    Replay,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let flags = cli.flags.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(flags.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::validation(format!("--threads: {e}")))?;
    let output = pool.install(|| match cli.command {
        Command::Capacity => commands::capacity(&flags),
        Command::Rate => commands::rate(&flags),
        Command::Curve => commands::curve(&flags),
        Command::Optimize => commands::optimize(&flags),
        Command::Simulate => commands::simulate(&flags),
        Command::Replay => commands::replay(&flags),
    })?;
    emit(&flags, output)
}

fn emit(flags: &Flags, output: Output) -> Result<(), CliError> {
    let format = flags.format.unwrap_or(Format::Csv);
    let json = || serde_json::to_string_pretty(&output.json).expect("plain data") + "\n";
    if let Some(path) = &flags.out {
        let body = match format {
            Format::Csv => output.csv.clone(),
            Format::Json => json(),
        };
        fs::write(path, body).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
    }
    match format {
        Format::Csv => print!("{}", output.text),
        Format::Json => print!("{}", json()),
    }
    if let Some(note) = output.note {
        eprintln!("{note}");
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
