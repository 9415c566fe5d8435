//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input rows do not match the schema the model was trained on.
    #[error("schema mismatch: {0}")]
    Schema(String),

    /// Too little usable out-of-bag information to calibrate.
    #[error("calibration error: {0}")]
    Calibration(String),

    /// A numerical routine failed (e.g. Cholesky after PSD repair).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A metric could not be evaluated at a specific point.
    #[error("metric error at point {point}: {reason}")]
    Metric { point: usize, reason: String },

    /// CSV / schema-file ingestion failure, with row/column context.
    #[error("ingestion error: {0}")]
    Ingestion(String),

    /// A requested split or configuration is infeasible for the data.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Ingestion(e.to_string())
    }
}
