//! Batch pipeline over the `autopersuade` library: one TOML config, one
//! output directory, one manifest.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

pub use commands::{run, Command, InferTarget};
pub use config::{Context, Overrides, RunConfig};
pub use error::{CliError, CliResult, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION};
pub use manifest::{RunManifest, StageRecord, StageStatus, MANIFEST_FILE};
