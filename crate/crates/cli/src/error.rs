//! CLI error type with stable process exit codes.
//!
//! * 2: configuration errors (unreadable or invalid config, missing seed)
//! * 3: domain errors (parameters outside physical range, failed fits)
//! * 4: null post-selection (no coincidence events survive)
//! * 5: I/O errors (always include the offending path)
//!
//! clap's own usage errors also exit with 2.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    NullPostSelection(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Domain(_) => 3,
            CliError::NullPostSelection(_) => 4,
            CliError::Io(_) => 5,
        }
    }

    pub fn io(path: &Path, err: &std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl From<ppbs_core::Error> for CliError {
    fn from(e: ppbs_core::Error) -> Self {
        match e {
            ppbs_core::Error::NullPostSelection => CliError::NullPostSelection(e.to_string()),
            other => CliError::Domain(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
