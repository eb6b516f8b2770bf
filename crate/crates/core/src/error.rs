//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Non-numeric or non-finite field. Row and column are 1-based file
    /// coordinates (the header line, when present, counts as row 1).
    #[error("parse error at row {row}, column {col}: {message}")]
    Parse {
        row: usize,
        col: usize,
        message: String,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("design matrix is rank deficient on the support of positive weights")]
    RankDeficient,

    #[error("degenerate sampling weights: {0}")]
    DegenerateWeights(String),

    #[error("density-weighted Gram matrix is singular or too ill-conditioned")]
    SingularDn,

    #[error("degenerate pilot sample: {0}")]
    DegeneratePilot(String),

    #[error("invalid sampling plan: {0}")]
    InvalidPlan(String),

    #[error("aggregation matrix n0*D0 + n*D1 is singular")]
    SingularCombination,

    #[error("variance-covariance estimate is missing (requires at least two batches)")]
    MissingVariance,

    #[error("batch estimation failed for batches {batches:?}: {message}")]
    PartialBatchFailure {
        batches: Vec<usize>,
        message: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
