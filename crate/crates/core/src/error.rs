use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Every term fell below the amplitude-prune tolerance.
    #[error("degenerate state: no term survives pruning")]
    DegenerateState,

    /// The operation needs a probe beam that the state does not carry.
    #[error("state error: {0}")]
    State(String),

    #[error("impossible outcome: {0}")]
    ImpossibleOutcome(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("size limit exceeded: {0}")]
    Size(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
