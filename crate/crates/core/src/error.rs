use thiserror::Error;

use crate::training::LossBreakdown;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown logger schema: {columns} columns")]
    UnknownSchema { columns: usize },
    #[error("no depth column and no `@<n>m` pattern in filename `{filename}`")]
    MissingDepth { filename: String },
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("SST gap of {missing_days} days after {after} exceeds the fill limit")]
    GapTooLong { after: String, missing_days: i64 },
    #[error("SST series is empty")]
    EmptySeries,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("SST does not cover the requested window: {0}")]
    SstCoverage(String),
    #[error("non-finite model output at z={z}, t={t}")]
    NonFiniteOutput { z: f64, t: f64 },
    #[error("non-finite gradient entry at index {index}")]
    NonFiniteGradient { index: usize },
    #[error("non-finite loss: {0}")]
    NonFiniteLoss(String),
    #[error("training diverged at epoch {epoch}")]
    Diverged {
        epoch: usize,
        history: Box<Vec<LossBreakdown>>,
    },
    #[error("query out of domain: {0}")]
    OutOfDomain(String),
    #[error("covariance factorization failed (jitter reached {jitter:e})")]
    FactorizationFailure { jitter: f64 },
    #[error("MMM needs 12 distinct calendar months, found {found}")]
    InsufficientMonths { found: usize },
    #[error("empty DHD window")]
    EmptyWindow,
    #[error("too few training depths: {0}")]
    TooFewDepths(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("checkpoint format: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad inputs).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteOutput { .. }
                | Error::NonFiniteGradient { .. }
                | Error::NonFiniteLoss(_)
                | Error::Diverged { .. }
                | Error::FactorizationFailure { .. }
        )
    }
}
