use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("singular configuration: {0}")]
    Singular(String),

    #[error("no convergence after {iterations} iterations (max residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The printed closed-form expansion produced a negative squared length.
    #[error("printed expansion gives negative squared length for leg {leg} ({value:e})")]
    AlgebraMismatch { leg: usize, value: f64 },

    #[error("generation failed at pose (theta={theta}, psi={psi}, c={c}): {reason}")]
    Generation {
        theta: f64,
        psi: f64,
        c: f64,
        reason: String,
    },

    #[error("normalization: {0}")]
    Normalization(String),

    #[error("split: {0}")]
    Split(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("training stalled: {0}")]
    TrainingStalled(String),

    #[error("model is not trained")]
    NotTrained,

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
