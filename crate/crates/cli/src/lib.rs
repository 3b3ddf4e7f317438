//! The `diffoci` command line: dataset generation, estimators, FOCI and
//! training runs. Every command writes its outputs plus a JSON manifest into
//! `--out-dir`; rerunning with the same arguments reproduces every file byte
//! for byte (wall-clock fields stay empty unless `--record-timing` is given).
//!
//! Exit codes: 0 success, 1 I/O or malformed input, 2 usage, 3 degenerate
//! input, 4 numerical failure.

mod commands;
mod manifest;

use std::ffi::OsString;
use std::fmt;

use clap::Parser;
use diffoci_core::Error;

pub use commands::Cli;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "DIFFOCI_THREADS";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) => match e {
                _ if e.is_degenerate() => EXIT_DEGENERATE,
                Error::InvalidArgument(_) | Error::MissingColumn(_) => EXIT_USAGE,
                Error::Numerical(_) | Error::DoubleBackward | Error::NonScalarLoss(..) => EXIT_NUMERIC,
                _ => EXIT_IO,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(Error::Json(e))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            // A second call in the same process finds the pool already built.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    configure_threads();
    let argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::dispatch(cli, argv) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
