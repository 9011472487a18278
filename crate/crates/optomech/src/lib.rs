//! Command-line driver for the optomechanics simulator: configuration,
//! experiments, verification suite and file output.

pub mod checks;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use config::{Experiment, RunConfig};
use error::{exit, CliError};
use output::Outcome;

#[derive(Debug, Parser)]
#[command(name = "optomech", version, about = "Optomechanical cavity simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Interior eigenvalues of a Hamiltonian.
    Spectrum(Args),
    /// Time evolution of a coherent product state.
    Evolve(Args),
    /// Husimi Q grids of the closed-form evolution.
    Husimi(Args),
    /// One observable over a range of one parameter.
    Sweep(Args),
    /// The verification suite.
    Verify(Args),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    Fig1,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    /// JSON run configuration.
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in configuration instead of a file.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Check results against independent oracles; failures exit with 3.
    #[arg(long)]
    pub verify: bool,
    /// Output directory; defaults to `out_dir` of the config, then `out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    pub fn parts(&self) -> (Experiment, &Args) {
        match self {
            Command::Spectrum(a) => (Experiment::Spectrum, a),
            Command::Evolve(a) => (Experiment::Evolve, a),
            Command::Husimi(a) => (Experiment::Husimi, a),
            Command::Sweep(a) => (Experiment::Sweep, a),
            Command::Verify(a) => (Experiment::Verify, a),
        }
    }
}

/// Runs one experiment in memory.
pub fn execute(experiment: Experiment, config: &RunConfig, verify: bool) -> Result<Outcome, CliError> {
    config.validate(experiment)?;
    match experiment {
        Experiment::Spectrum => commands::spectrum::run(config, verify),
        Experiment::Evolve => commands::evolve::run(config, verify),
        Experiment::Husimi => commands::husimi::run(config, verify),
        Experiment::Sweep => commands::sweep::run(config, verify),
        Experiment::Verify => commands::verify::run(config, verify),
    }
}

fn load(experiment: Experiment, args: &Args) -> Result<RunConfig, CliError> {
    match (&args.config, args.preset) {
        (Some(path), None) => RunConfig::load(path),
        (None, Some(Preset::Fig1)) => RunConfig::fig1(experiment),
        _ => Err(CliError::config("give exactly one of --config and --preset")),
    }
}

/// Parses, runs and writes; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let (experiment, args) = cli.command.parts();
    let result = load(experiment, args).and_then(|config| {
        let outcome = execute(experiment, &config, args.verify)?;
        let dir = args.out.clone().or_else(|| config.out_dir.clone().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
        for path in outcome.write(&dir)? {
            println!("{}", path.display());
        }
        match outcome.failure {
            Some(e) => Err(e),
            None => Ok(()),
        }
    });
    match result {
        Ok(()) => exit::SUCCESS,
        Err(e) => {
            eprintln!("optomech: {e}");
            e.exit_code()
        }
    }
}
