use thiserror::Error;

/// Errors raised by the allocation library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A value violates a structural invariant (simplex sum, budget equality).
    #[error("invariant violated: {0}")]
    Invariant(String),
    /// The Gram matrix could not be factorized even after jitter escalation.
    #[error("GP fit failed: {0}")]
    Fit(String),
    /// An operation was called outside of its contract.
    #[error("contract error: {0}")]
    Contract(String),
    /// Invalid experiment configuration.
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
