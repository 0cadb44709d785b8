use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the numeric core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("invalid usage: {0}")]
    Usage(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("missing context vectors for {} entries: {}", .0.len(), .0.join(", "))]
    MissingContext(Vec<String>),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}
