//! Experiment harness behind the `nysgm` binary: configuration resolution,
//! trial orchestration, aggregation and CSV emission.

pub mod config;
pub mod experiment;

use thiserror::Error;

/// Harness-level failures, split by exit code: validation problems exit
/// with 1, I/O problems with 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn io(msg: impl Into<String>) -> Self {
        CliError::Io(msg.into())
    }
}

impl From<nysgm_core::Error> for CliError {
    fn from(e: nysgm_core::Error) -> Self {
        match e {
            nysgm_core::Error::Io(_) | nysgm_core::Error::Parse { .. } => {
                CliError::Io(e.to_string())
            }
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
