use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PwlError {
    /// Input text could not be parsed at all.
    #[error("parse error: {0}")]
    Parse(String),
    /// Input parsed but violates a structural invariant.
    #[error("validation error: {0}")]
    Validation(String),
    /// An identifier was outside its valid range.
    #[error("index out of range: {0}")]
    Index(String),
    /// A plan that was required to be satisfactory is not.
    #[error("plan is not satisfactory: {0}")]
    NotSatisfactory(String),
    /// An assignment's restriction to some clause falsifies it, so no clause action matches.
    #[error("assignment falsifies clause {clause}")]
    RestrictionUnsatisfied { clause: usize },
    /// A brute-force routine was asked to work beyond its hard limits.
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),
    /// A declared size cap would be violated.
    #[error("cap exceeded: {0}")]
    CapExceeded(String),
}

pub type Result<T, E = PwlError> = std::result::Result<T, E>;

pub(crate) fn validation(msg: impl Into<String>) -> PwlError {
    PwlError::Validation(msg.into())
}
