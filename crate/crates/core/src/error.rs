use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the optimizer, the evaluation environment and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("budget exceeded: request charges {requested} but only {remaining} remains")]
    BudgetExceeded { requested: f64, remaining: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("formula case error: {0}")]
    Case(String),

    #[error("environment is inapplicable: {0}")]
    Inapplicable(String),

    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
