use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("singularity: {0}")]
    Singularity(String),
    #[error("ordering error: {0}")]
    Ordering(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("window exit: {0}")]
    Window(String),
    #[error("invalid coupling: {0}")]
    Coupling(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("format error: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
