//! Command-line pipeline around the `intermob` library: `fit`, `evaluate`,
//! `sync` and `gen`.
//!
//! Exit codes: 0 on success, 1 for fitting or internal failures, 2 for bad
//! flags, configs or input files.

pub mod args;
pub mod commands;
pub mod error;
pub mod pipeline;
pub mod report;

use std::ffi::OsString;

use clap::Parser;

pub use args::{Cli, Command, ModelName, RunConfig};
pub use error::{CliError, CliResult};

fn pool(workers: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::failure(format!("cannot start worker pool: {e}")))
}

pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit(a) => {
            let cfg = RunConfig::resolve(&a, None, None, None)?;
            pool(cfg.workers)?.install(|| commands::cmd_fit(&cfg).map(|_| ()))
        }
        Command::Evaluate(a) => {
            let cfg = RunConfig::resolve(&a.run, a.params.clone(), None, None)?;
            pool(cfg.workers)?.install(|| commands::cmd_evaluate(&cfg))
        }
        Command::Sync(a) => {
            let cfg = RunConfig::resolve(&a.run, None, a.reference.clone(), a.windows.clone())?;
            commands::cmd_sync(&cfg)
        }
        Command::Gen(a) => pool(a.workers.unwrap_or(0))?.install(|| commands::cmd_gen(&a)),
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code; diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
