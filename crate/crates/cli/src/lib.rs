//! `oplab` experiment driver: dataset generation, structured recovery runs,
//! kernel fits and multi-resolution evaluation, with strict TOML configs and a
//! checksummed binary container for datasets and models.

pub mod commands;
pub mod config;
pub mod container;
pub mod error;
pub mod persist;

use std::path::Path;

pub use commands::Context;
pub use config::ExperimentConfig;
pub use error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Generate,
    Recover,
    Fit,
    Eval,
}

/// Loads the config and runs one subcommand; returns the summary lines.
pub fn run(command: Command, config_path: &Path, ctx: &Context) -> Result<Vec<String>, CliError> {
    let config = ExperimentConfig::load(config_path)?;
    match command {
        Command::Generate => commands::generate(&config, ctx),
        Command::Recover => commands::recover(&config, ctx),
        Command::Fit => commands::fit(&config, ctx),
        Command::Eval => commands::eval(&config, ctx),
    }
}
