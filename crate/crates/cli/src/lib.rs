//! Configuration, scenario runs, snapshots and diagnostics for the `soh` binary.

pub mod config;
pub mod runner;
pub mod snapshot;

use std::path::PathBuf;

use soh_core::SchemeError;
use thiserror::Error;

pub use config::{parse_config, ConfigError, RunConfig, Scenario, Stepper};
pub use runner::{run, sweep, RunSummary, SweepRow, Verdict};
pub use snapshot::{read_snapshot, write_snapshot, Snapshot, SnapshotData, SnapshotError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solver aborted at step {step}: {source}")]
    Solver {
        step: usize,
        #[source]
        source: SchemeError,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
}

impl CliError {
    /// Process exit code: 2 for configuration errors, 3 for solver aborts, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver { .. } => 3,
            CliError::Io { .. } | CliError::Snapshot(_) => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}
