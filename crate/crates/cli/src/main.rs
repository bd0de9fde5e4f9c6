//! `sealbid`: protocol runs, incentive sweeps, revenue tables and the
//! forced-decryption benchmark.

mod commands;
mod options;

use std::process::ExitCode;

use clap::Parser;

use options::Cli;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sealbid: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
