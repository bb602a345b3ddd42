//! `vitis` — vineyard detection evaluation and 3-D cluster counting from
//! the command line. Subcommands wrap the library pipeline end to end:
//! score predictions (`eval`), count clusters across a video
//! reconstruction (`track`), generate benchmark scenes (`synth`), cut an
//! instance mask from scribbles (`scribble`), and sanity-check a dataset
//! directory (`validate`).
//!
//! Exit codes: 0 success, 2 input/validation problem, 1 internal error.
//! Diagnostics go to stderr; stdout carries results only.

mod cmd_eval;
mod cmd_scribble;
mod cmd_synth;
mod cmd_track;
mod cmd_validate;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Failure routed to an exit code: validation problems name bad inputs
/// (exit 2), internal errors are bugs or broken invariants (exit 1).
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Internal(String),
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self::Validation(message.into())
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::Internal(message.into())
    }
}

/// Shorthand for "cannot read/write this user-supplied path".
pub fn path_error(verb: &str, path: &std::path::Path, err: std::io::Error) -> CliError {
    CliError::Validation(format!("cannot {verb} {}: {err}", path.display()))
}

#[derive(Parser)]
#[command(
    name = "vitis",
    version,
    about = "Vineyard fruit detection metrics and 3-D cluster counting toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score predictions against ground truth; writes JSON and CSV reports.
    Eval(cmd_eval::EvalArgs),
    /// Count grape clusters by linking detections through a sparse
    /// reconstruction; prints "count=<n>" as the final stdout line.
    Track(cmd_track::TrackArgs),
    /// Generate a synthetic scene with known per-cluster ground truth.
    Synth(cmd_synth::SynthArgs),
    /// Grow an instance mask from foreground/background scribbles.
    Scribble(cmd_scribble::ScribbleArgs),
    /// Index a dataset directory and print per-variety statistics.
    Validate(cmd_validate::ValidateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Eval(args) => cmd_eval::run(&args),
        Command::Track(args) => cmd_track::run(&args),
        Command::Synth(args) => cmd_synth::run(&args),
        Command::Scribble(args) => cmd_scribble::run(&args),
        Command::Validate(args) => cmd_validate::run(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(message)) => {
            eprintln!("internal error: {message}");
            ExitCode::from(1)
        }
    }
}
