//! `cqed`: spectra, resonance maps, validity tables, fits and oracle checks
//! written as CSV/JSON files with a run manifest.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "cqed",
    version,
    about = "Reflection spectra of emitter ensembles in optical resonators"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Seed for randomised steps (oracle instances, fit restarts)
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory for output files
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Format of the main data file
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// File name prefix, defaults to the subcommand name
    #[arg(long, global = true)]
    pub prefix: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Reflection spectrum versus probe detuning
    Spectrum(commands::SpectrumArgs),
    /// Resonance positions versus βN
    Resonances(commands::ResonanceArgs),
    /// Single-mode validity ratios for the survey table or a custom system
    Validity(commands::ValidityArgs),
    /// Fit the cascaded model to a measured spectrum
    Fit(commands::FitArgs),
    /// Unit and parameter conversions
    Convert(commands::ConvertArgs),
    /// Compare the dense coupled-field solve with the closed form
    OracleCheck(commands::OracleArgs),
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Numerical(String),
}

impl From<cqed_core::Error> for Failure {
    fn from(e: cqed_core::Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = &cli.global;
    let outcome = match cli.command {
        Command::Spectrum(a) => commands::spectrum(g, a),
        Command::Resonances(a) => commands::resonances(g, a),
        Command::Validity(a) => commands::validity(g, a),
        Command::Fit(a) => commands::fit(g, a),
        Command::Convert(a) => commands::convert(g, a),
        Command::OracleCheck(a) => commands::oracle_check(g, a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
