//! Command-line front end: synthetic data, model files, codes and experiment
//! reports.

pub mod codes;
pub mod commands;
pub mod modelfile;
pub mod output;

use gmra::GmraError;
use thiserror::Error;

pub use commands::{run, Cli};

/// Failures, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or arguments; exit code 2.
    #[error("{0}")]
    Usage(String),
    /// Unreadable, malformed or unsuitable input; exit code 3.
    #[error("{0}")]
    Data(String),
    /// A numeric invariant broke; exit code 4.
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<GmraError> for CliError {
    fn from(e: GmraError) -> Self {
        let msg = e.to_string();
        match e {
            GmraError::InvalidArgument(_) => CliError::Usage(msg),
            GmraError::Numeric(_) => CliError::Numeric(msg),
            _ => CliError::Data(msg),
        }
    }
}
