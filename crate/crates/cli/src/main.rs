//! Command-line front end: reads CSV data, runs one estimator and writes a
//! JSON (or CSV) record of the configuration and the result.
//!
//! Exit status: 0 on success, 2 for input or parameter errors, 3 when a
//! numerical procedure fails (spectral division, quadrature convergence).

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Core(nnmatch::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(msg) => f.write_str(msg),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<nnmatch::Error> for CliError {
    fn from(e: nnmatch::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(format!("output: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(format!("csv output: {e}"))
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Psi(a) => commands::psi(a),
        Command::Phi(a) => commands::phi(a),
        Command::Att(a) => commands::att(a),
        Command::AteRegion(a) => commands::ate_region(a),
        Command::CovshiftLoss(a) => commands::covshift_loss(a),
        Command::Berkson(a) => commands::berkson(a),
        Command::Simulate(a) => commands::simulate(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(0) => Err(CliError::Input("--threads must be at least 1".into())),
        Some(t) => nnmatch::with_workers(t, || run(&cli)),
        None => run(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
