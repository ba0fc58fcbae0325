use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, dimensions or settings that do not fit together.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller-supplied value violates an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A loss, gradient or parameter became NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// An upstream pipeline artifact was not found.
    #[error("missing artifact {path}: run `{subcommand}` first")]
    MissingArtifact { path: PathBuf, subcommand: &'static str },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
