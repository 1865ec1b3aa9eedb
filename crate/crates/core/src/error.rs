use thiserror::Error;

use crate::iterate::Trace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An operator produced a non-finite coordinate.
    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("numeric overflow at step {step}")]
    NumericOverflow { step: usize },

    /// Iteration left the finite range. The trace holds every row computed
    /// before the offending step.
    #[error("iteration diverged at step {step}")]
    Divergence { step: usize, trace: Box<Trace> },

    #[error("degenerate operator: all {excluded} sampled pairs lie within the fixed-point exclusion threshold")]
    Degenerate { excluded: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
