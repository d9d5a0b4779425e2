use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A warp or quadrilateral is degenerate (singular matrix, point at infinity,
    /// self-intersecting box).
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("fit error: {0}")]
    Fit(String),

    /// The Newton system could not be solved even after regularization.
    #[error("step error: {0}")]
    Step(String),

    #[error("ingestion error in {path}: {message}")]
    Ingestion { path: PathBuf, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn geometry(msg: impl Into<String>) -> Self {
        Error::Geometry(msg.into())
    }
}
