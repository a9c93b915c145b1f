//! Command-line front end for `cascadeflow`: config handling, atomic output
//! files with a run manifest, and the stage orchestration behind each
//! subcommand.

pub mod args;
pub mod config;
pub mod output;
pub mod pipeline;

use std::io;
use std::path::PathBuf;

use cascadeflow::ingest::IngestError;

/// Failure categories, each with its own exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read input {path}: {source}")]
    MissingInput {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("invalid input or configuration: {0}")]
    Invalid(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Output { .. } => 1,
            CliError::MissingInput { .. } => 2,
            CliError::Invalid(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io { path, source } => CliError::MissingInput { path, source },
            other => CliError::Invalid(other.to_string()),
        }
    }
}
