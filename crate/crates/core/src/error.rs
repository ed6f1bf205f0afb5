use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while loading data or evaluating estimators.
#[derive(Debug, Error)]
pub enum Error {
    /// A single input record failed validation. `record` is 1-based.
    #[error("record {record}: {reason}")]
    InvalidRecord { record: usize, reason: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("stratum {0} has no observations")]
    EmptyStratum(usize),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// One of the regularity conditions the asymptotic theory needs does not hold.
    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("no observation lies at or below the poverty line; no inference possible")]
    NoPoor,

    #[error("variance estimate {0:e} is negative beyond rounding tolerance")]
    NegativeVariance(f64),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
