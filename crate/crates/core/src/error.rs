use thiserror::Error;

/// Failure categories shared by every module. The CLI maps each variant to
/// its own exit code.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// Requested computation is larger than the evaluator's fixed envelope.
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    /// Inputs violate an operation's precondition.
    #[error("domain error: {0}")]
    Domain(String),
    /// Parameters fall outside the asymptotic window a check is valid in.
    #[error("regime violation: {0}")]
    Regime(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
