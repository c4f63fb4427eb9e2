use std::path::PathBuf;

use thiserror::Error;

use crate::model::Frame;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("no correspondence record for frames {0} and {1}")]
    MissingCorrespondence(Frame, Frame),

    #[error("feature dimension mismatch: model expects {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("training set needs at least one positive and one negative sample")]
    SingleClass,

    #[error("potential table does not cover the graph: {0}")]
    PotentialMismatch(String),

    #[error("instance has {vars} variables, brute force supports at most {max}")]
    TooLarge { vars: usize, max: usize },

    #[error("fixed assignment is infeasible")]
    Infeasible,

    #[error("internal error: {0}")]
    Internal(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

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

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
