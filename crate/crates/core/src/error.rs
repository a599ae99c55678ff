//! Error type shared across the crate.

/// Errors produced by panel construction, transformation and estimation.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Matrix or vector dimensions do not conform.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A non-finite entry was found where finite values are required.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The stacked covariate matrix does not have full column rank. The
    /// offending covariate block is identified by its 1-based index.
    #[error(
        "covariate block {block} makes the stacked design rank deficient; \
         the non-collinearity condition required for estimation fails"
    )]
    RankDeficient { block: usize },

    /// A covariate is identically zero, so no low-rank factorisation exists.
    #[error("covariate {0} is identically zero")]
    DegenerateCovariate(usize),

    /// The residual matrix is zero, so no noise covariance can be estimated.
    #[error("residual matrix is zero; noise covariance is degenerate")]
    DegenerateVariance,

    /// A matrix that must be inverted is singular or too ill-conditioned.
    #[error("singular matrix: {0}")]
    Singular(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
