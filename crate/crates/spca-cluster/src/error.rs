//! Error type shared across the library.

use thiserror::Error;

/// Errors produced by the clustering library.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data violated a structural requirement (non-finite entries,
    /// too few samples, dimension mismatch between paired values).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// An argument was outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A configuration object failed validation.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// The class-mean signal matrix has rank below the requested number of
    /// components.
    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    /// The initializer could not produce a basis of the requested rank.
    #[error("initialization failure: {0}")]
    InitFailure(String),

    /// The regression design built from the initial basis is rank deficient.
    #[error("initial basis yields a rank-deficient regression design")]
    InitRankDeficient,

    /// The penalized selection kept no usable rows.
    #[error("selected loading rows are rank deficient")]
    RankDeficientSelection,

    /// Projecting the data onto the estimated loadings lost rank.
    #[error("projected sample embedding is rank deficient")]
    RankDeficientProjection,

    /// A covariance matrix was asymmetric or not positive definite.
    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),
}

impl Error {
    /// True for errors that indicate bad inputs or configuration rather
    /// than a numerical failure inside a pipeline run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidData(_) | Error::InvalidArgument(_) | Error::InvalidConfig(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
