//! Command-line driver: one subcommand per pipeline stage.
//!
//! Settings come from a flat `key = value` file (`--config`) and
//! `--set key=value` overrides; see [`config::RunConfig`] for every key.

pub mod commands;
pub mod config;
pub mod exit;

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::RunConfig;
pub use exit::{CliError, ExitStatus};

#[derive(Debug, Parser)]
#[command(
    name = "sentcorr",
    version,
    about = "Sentiment classification and inter-sentiment correlation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// File of `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one setting; repeatable, applied after the config file.
    #[arg(long = "set", short = 's', global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a vocabulary from the corpus training split.
    Vocab,
    /// Train a model; writes a checkpoint and a history CSV.
    Train,
    /// Evaluate a checkpoint; writes metrics JSON and a prediction log.
    Eval,
    /// Classify text lines from standard input.
    Predict,
    /// Confusion matrices, binarization and vote over prediction logs.
    Correlate {
        #[arg(required = true, value_name = "LOG")]
        logs: Vec<PathBuf>,
    },
    /// Finite-difference check of both models at a tiny configuration.
    Gradcheck,
    /// Render a summary grid from metrics files.
    Report {
        #[arg(required = true, value_name = "METRICS")]
        metrics: Vec<PathBuf>,
    },
}

/// Runs with the process's standard input and output.
pub fn run<I, T>(argv: I) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    run_with(argv, &mut stdin.lock(), &mut stdout.lock())
}

/// Runs with explicit streams. Errors go to standard error.
pub fn run_with<I, T>(argv: I, input: &mut dyn BufRead, output: &mut dyn Write) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitStatus::Usage
            } else {
                ExitStatus::Success
            };
        }
    };
    match dispatch(&cli, input, output) {
        Ok(()) => ExitStatus::Success,
        Err(e) => {
            eprintln!("error: {e}");
            e.status()
        }
    }
}

fn dispatch(cli: &Cli, input: &mut dyn BufRead, output: &mut dyn Write) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(cli.config.as_deref(), &cli.set)?;
    commands::write_snapshot(&cfg)?;
    match &cli.command {
        Command::Vocab => commands::vocab(&cfg, output),
        Command::Train => commands::train(&cfg, output),
        Command::Eval => commands::eval(&cfg, output),
        Command::Predict => commands::predict(&cfg, input, output),
        Command::Correlate { logs } => commands::correlate(&cfg, logs, output),
        Command::Gradcheck => commands::gradcheck(&cfg, output),
        Command::Report { metrics } => commands::report(&cfg, metrics, output),
    }
}
