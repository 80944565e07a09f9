//! CLI-level errors: anything here exits with status 1; flagged invariant
//! violations are not errors and exit with status 2 instead.

use std::path::PathBuf;

use polarforge_core::CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, CliError>;
