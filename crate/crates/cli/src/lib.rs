//! Command-line front end for the grapheneqg engine: configuration parsing,
//! the six commands, and the CSV/JSON exporters with their run manifest.

pub mod check;
pub mod commands;
pub mod config;
pub mod error;
pub mod export;

pub use commands::{run_command, Command};
pub use config::{parse_config, Overrides, RunConfig};
pub use error::{CliError, Result};
pub use export::{ExportBundle, ManifestEntry, Provenance};
