//! Command-line driver for the qutrit Otto engine: configuration parsing,
//! subcommands, sweeps and CSV/JSON emission.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{load_config, parse_config, RunConfig};
pub use error::{CliError, Result, Violation};
pub use output::Format;
