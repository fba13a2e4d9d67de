//! `serank`: rank URLs with search-engine oracles, correlate the rankings
//! with expert lists, and simulate noisy engines.
//!
//! Exit codes: 0 success, 1 configuration error, 2 oracle error, 3 data error.

mod config;
mod correlate;
mod error;
mod manifest;
mod rank;
mod simulate;

use std::process::ExitCode;

use clap::Parser;

use config::{Cli, Command, CorrelateConfig, FileConfig, RankConfig, SimulateConfig};
use error::CliResult;

fn run(cli: Cli) -> CliResult<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Rank(a) => rank::run(&RankConfig::resolve(a, file)?),
        Command::Correlate(a) => correlate::run(&CorrelateConfig::resolve(a, file)?),
        Command::Simulate(a) => simulate::run(&SimulateConfig::resolve(a, file)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
