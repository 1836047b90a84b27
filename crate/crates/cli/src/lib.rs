//! Command-line harness around `psd-extract`: matrix generation, CSV reports,
//! figure presets and property verification.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod verify;

pub use cli::{run, Cli};
pub use config::ExperimentConfig;
pub use error::{CliError, CliResult, EXIT_CONFIG, EXIT_OK, EXIT_PROPERTY, EXIT_RUNTIME};
