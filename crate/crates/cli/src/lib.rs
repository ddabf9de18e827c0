//! Driver for the `mlt` binary: layered configuration, experiment
//! subcommands, and deterministic CSV/JSON output with a run manifest.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use error::{CliError, CliResult};
