//! Command-line front end: dataset generation, clustering of stored datasets
//! and seeded benchmark sweeps.

pub mod benchmark;
pub mod commands;

pub use assc_core as core;

use std::io;

use thiserror::Error;

/// Failure of a CLI command, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] assc_core::Error),

    #[error("{0}")]
    Usage(String),
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Core(assc_core::Error::Io(e))
    }
}

impl CliError {
    /// 1 for I/O, 2 for validation and parsing, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        use assc_core::Error as E;
        match self {
            CliError::Core(E::Io(_)) => 1,
            CliError::Core(E::Numeric(_)) => 3,
            CliError::Core(E::Validation(_) | E::NormViolation { .. } | E::Parse { .. }) => 2,
            CliError::Usage(_) => 2,
        }
    }
}

/// Worker count requested through `ASSC_THREADS`; `0` or unset means automatic.
pub fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var("ASSC_THREADS") {
        Ok(v) if !v.trim().is_empty() => v.trim().parse().map_err(|_| {
            CliError::Usage(format!(
                "ASSC_THREADS must be a non-negative integer, got `{v}`"
            ))
        }),
        _ => Ok(0),
    }
}
