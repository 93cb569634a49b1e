use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data does not describe a valid distribution, kernel or tensor.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// `KL(p || q)` with `p(i) > 0` and `q(i) = 0`.
    #[error("support violation at index {index}: p = {p}, q = 0")]
    SupportViolation { index: usize, p: f64 },

    /// A documented precondition of the operation does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// The requested object does not exist (negative extreme point, empty feasible set, ...).
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The operation declined to run, usually because it would be too expensive.
    #[error("refused: {0}")]
    Refused(String),

    /// An internal invariant was violated; this is a bug or a numerical breakdown.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
