//! Configuration handling and subcommand drivers for the `tfhj` binary.

pub mod commands;
pub mod config;

pub use commands::{run, Outcome};
pub use config::{ConfigError, RunConfig, Subcommand};
