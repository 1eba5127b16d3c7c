//! The `regvar` command-line tool.
//!
//! [`run`] parses arguments, sets up the worker pool and dispatches to one
//! subcommand. Every command writes its outputs plus a JSON manifest next
//! to the primary output. Errors are reported on stderr with the prefixes
//! `error[usage]:` (exit 1) and `error[data]:` (exit 2).

pub mod args;
mod commands;
pub mod manifest;
pub mod methods;
pub mod reproduce;

use std::ffi::OsString;

use clap::Parser;
use thiserror::Error;

pub use args::Cli;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    fn prefix(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "error[usage]:",
            CliError::Data(_) => "error[data]:",
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        })*
    };
}

data_error!(
    regvar_core::dataset::DatasetError,
    regvar_core::solver::SolverError,
    regvar_core::varmodel::VarError,
    regvar_core::regime::RegimeError,
    regvar_core::simgen::SimError,
    regvar_core::analysis::AnalysisError,
    csv::Error,
    serde_json::Error
);

/// Wraps an I/O failure with the path involved.
pub(crate) fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

/// Worker count from the flag, then `REGVAR_THREADS`, then the machine.
pub fn resolve_threads(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(n) = flag {
        return if n == 0 {
            Err(CliError::Usage("--threads must be at least 1".into()))
        } else {
            Ok(n)
        };
    }
    match std::env::var("REGVAR_THREADS") {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Usage(format!(
                "REGVAR_THREADS=`{v}` is not a positive integer"
            ))),
        },
        _ => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs the tool on `argv` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            return 1;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{} {e}", e.prefix());
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let threads = resolve_threads(cli.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Data(format!("thread pool: {e}")))?;
    let ctx = commands::Context {
        threads,
        verbose: cli.verbose,
    };
    pool.install(|| commands::dispatch(cli.command, &ctx))
}
