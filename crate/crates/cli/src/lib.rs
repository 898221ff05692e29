//! Front end for the swarm model and simulator: scenario files, presets,
//! the model-versus-simulation validation harness and the `swarmsim`
//! subcommands.

pub mod commands;
pub mod config_file;
pub mod output;
pub mod presets;
pub mod validation;

pub use commands::{run, Cli, CliError, Command};
