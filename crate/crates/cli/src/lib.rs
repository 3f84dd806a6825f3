//! `tddyn` command line front end.
//!
//! Exit codes: 0 success, 1 runtime failure (I/O, solver failure, failed
//! sweep rows, failed oracles), 2 usage error.

pub mod args;
mod commands;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;

pub use args::Cli;
pub use commands::execute;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Help or version text requested; not a failure.
    Info(String),
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Info(_) => 0,
            CliError::Runtime(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Info(msg) => write!(f, "{msg}"),
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Runtime(msg) => write!(f, "error: {msg}"),
        }
    }
}

impl From<tddyn_core::Error> for CliError {
    fn from(e: tddyn_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Parses and range-checks a command line, program name first.
pub fn parse_cli<I, T>(argv: I) -> Result<Cli, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => CliError::Info(e.to_string()),
        ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            CliError::Usage(format!("a subcommand is required\n\n{}", e.render()))
        }
        _ => CliError::Usage(e.to_string().trim_start_matches("error: ").trim_end().to_owned()),
    })?;
    commands::validate(&cli)?;
    Ok(cli)
}

/// Full run: parse, execute, report. Returns the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let result = parse_cli(argv).and_then(|cli| execute(&cli, stdout, stderr));
    match result {
        Ok(()) => 0,
        Err(CliError::Info(text)) => {
            let _ = write!(stdout, "{text}");
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            e.exit_code()
        }
    }
}
