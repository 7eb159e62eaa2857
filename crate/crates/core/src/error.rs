use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid tile level {zoom}: {reason}")]
    InvalidLevel { zoom: u8, reason: &'static str },

    #[error("cannot parse quadkey {quadkey:?}: {reason}")]
    Quadkey { quadkey: String, reason: &'static str },

    #[error("{file}: row {row}: {message}")]
    Schema {
        file: String,
        row: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}: {source}")]
    Csv {
        file: String,
        #[source]
        source: csv::Error,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("country {0} has no normalization statistics")]
    UnknownCountry(String),

    #[error("missing country statistics for {0}")]
    MissingCountryStats(String),

    #[error("arity mismatch: expected {expected} values, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("too few rows for {context}: need {needed}, got {got}")]
    TooFewRows {
        context: String,
        needed: usize,
        got: usize,
    },

    #[error("cluster {0} has no window tile with features")]
    Unjoinable(String),

    #[error("model file line {line}: {message}")]
    ModelFormat { line: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
