use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A structural invariant does not hold (malformed partition, tree, forest).
    #[error("invariant violated: {0}")]
    Invariant(String),
    /// A hypothesis required by a lemma check is not met by the supplied parameters.
    #[error("precondition not met: {0}")]
    Precondition(String),
    /// The request exceeds an enumeration or integration capacity.
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    /// Two independent evaluation paths disagree beyond tolerance.
    #[error("cross-check failed: {0}")]
    CrossCheck(String),
    /// The request is outside the supported feature set.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// A flow schedule does not reach the scale required by its boundary conditions.
    #[error("incomplete flow: {0}")]
    IncompleteFlow(String),
    /// A numerical routine did not reach its target accuracy.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
