use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range (length {len})")]
    Index { index: usize, len: usize },

    #[error("densities live on different grids")]
    GridMismatch,

    #[error("partitions were computed for different parameter sequences")]
    SequenceMismatch,

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("no convergence after {iterations} iterations (last change {last_change:e})")]
    Convergence { iterations: usize, last_change: f64 },

    #[error("state space of {states} exceeds budget {budget}")]
    Resource { states: usize, budget: usize },

    #[error("degenerate fit: {usable} usable points, need at least 3")]
    DegenerateFit { usable: usize },

    #[error("config parse error at line {line}, column {column}: {message}")]
    ConfigParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config field `{field}` out of range: {message}")]
    Range { field: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
