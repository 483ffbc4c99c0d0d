use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("neurons {left} and {right} are parallel and unpinned, their corner is undefined")]
    DegenerateParallel { left: usize, right: usize },

    #[error("corner ordering violated between pairs {pair} and {next}")]
    InconsistentCorners { pair: usize, next: usize },

    #[error("corner of neurons {ids:?} is not unique (singular system)")]
    SingularCorner { ids: Vec<usize> },

    #[error("partition degenerate: {0}")]
    Degeneracy(String),

    #[error("non-finite weights after step at t = {time}: {detail}")]
    NonFinite { time: f64, detail: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error comes from the numerics rather than from inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::DegenerateParallel { .. }
                | Error::InconsistentCorners { .. }
                | Error::SingularCorner { .. }
                | Error::Degeneracy(_)
                | Error::NonFinite { .. }
        )
    }
}
