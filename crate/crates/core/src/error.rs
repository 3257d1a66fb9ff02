use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    /// The stacked matrix `[J; L]` is numerically rank deficient, i.e. the
    /// null spaces of `J` and `L` intersect.
    #[error("degenerate matrix pair: smallest singular value of [J; L] is {smallest:e}, largest {largest:e}")]
    DegeneratePair { smallest: f64, largest: f64 },

    #[error("inconsistent rank {rank}: singular value {index} is zero")]
    InconsistentRank { rank: usize, index: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
