use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value {value} in {what}")]
    NonFinite { what: &'static str, value: f64 },

    #[error("length mismatch in {what}: expected {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("values must be non-decreasing (index {index}: {prev} > {next})")]
    Decreasing { index: usize, prev: f64, next: f64 },

    #[error("invalid quantile orders: {0}")]
    InvalidOrders(String),

    #[error("weights are not on the simplex: {0}")]
    OffSimplex(String),

    #[error("probability level {0} outside (0, 1]")]
    InvalidLevel(f64),

    #[error("estimator misuse: {0}")]
    Estimator(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rank {rank} outside 1..={k}")]
    RankOutOfRange { rank: usize, k: usize },

    #[error("incomplete panel: {0}")]
    IncompletePanel(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing input {}", .0.display())]
    MissingInput(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable category, used for CLI exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io(_) | Error::MissingInput(_) => "io",
            Error::Parse { .. } | Error::Csv(_) => "parse",
            Error::Config(_) => "config",
            Error::IncompletePanel(_) => "panel",
            _ => "validation",
        }
    }
}
