//! Command-line front end: `abscam explain | evaluate | pointing | sanity`.

use std::ffi::OsString;
use std::fmt;
use std::process::ExitCode;

use clap::Parser;

mod commands;
pub mod config;
mod dataset;
mod report;

pub use config::{Cli, Command, Flags, RunConfig};

/// Version of the CSV and JSON layouts written by every subcommand.
pub const SCHEMA_VERSION: u32 = 1;

/// Why a run stopped. Maps onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid flags, config, model profile or annotation file (exit 2).
    Usage(String),
    /// Nothing could be processed (exit 1).
    Failed(String),
}

impl CliError {
    pub fn usage(msg: impl fmt::Display) -> Self {
        CliError::Usage(msg.to_string())
    }

    pub fn failed(msg: impl fmt::Display) -> Self {
        CliError::Failed(msg.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failed(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Runs a parsed command and returns a one-line summary.
pub fn execute(cli: Cli) -> Result<String, CliError> {
    let (name, flags) = cli.command.parts();
    let config = RunConfig::resolve(name, flags)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::failed(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match name {
        "explain" => commands::explain::run(&config),
        "evaluate" => commands::evaluate::run(&config),
        "pointing" => commands::pointing::run(&config),
        "sanity" => commands::sanity::run(&config),
        other => unreachable!("unknown command {other}"),
    })
}
