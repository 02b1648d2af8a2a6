use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a structural constraint (counts, ids, missing status).
    #[error("validation error: {0}")]
    Validation(String),

    /// A cell or field could not be parsed.
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    /// A parameter lies outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller-supplied control argument is unusable.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Non-finite values or failed numerical inversion.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A rate estimator whose denominator vanished.
    #[error("{rate} is undefined: {reason}")]
    UndefinedRate { rate: &'static str, reason: String },

    #[error("cannot open {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
