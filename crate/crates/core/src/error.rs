use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("element {value} is outside the domain of size {size}")]
    Domain { value: usize, size: usize },
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("capability exceeded: {0}")]
    Capability(String),
    #[error("bad parameter: {0}")]
    Parameter(String),
    #[error("unknown game `{0}`")]
    UnknownGame(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_domain(value: usize, size: usize) -> Result<()> {
    if value < size {
        Ok(())
    } else {
        Err(Error::Domain { value, size })
    }
}
