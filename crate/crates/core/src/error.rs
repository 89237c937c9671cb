use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("active collection is empty")]
    EmptyActive,
    #[error("controlled collection is not a subset of the active collection (policy {0})")]
    ControlledNotActive(usize),
    #[error("unknown policy id {0}")]
    UnknownPolicy(usize),
    #[error("pairwise weight requested for identical policies ({0})")]
    SamePolicy(usize),
    #[error("without-replacement stream over {n} items is exhausted")]
    StreamExhausted { n: usize },
    #[error("item index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("true positive rate is undefined when no item has positive mean")]
    UndefinedTpr,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
