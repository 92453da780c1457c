//! File formats, configuration loading and command execution for the
//! `fluxgate` binary. The physics lives in [`fluxgate_core`].

use std::path::PathBuf;

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{execute, Command, Outcome, OutputFormat, RunManifest, Status};
pub use config::{load_config, Settings};

/// Exit code for usage and configuration errors.
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] fluxgate_core::Error),
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        EXIT_USAGE
    }
}
