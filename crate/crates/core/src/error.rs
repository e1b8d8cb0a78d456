use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cannot split sample: {0}")]
    Split(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive semi-definite (last jitter tried: {jitter:e})")]
    NotPsd { jitter: f64 },

    #[error("gram matrix in state {found:?}, expected {expected:?}")]
    WrongState {
        expected: crate::kernels::GramState,
        found: crate::kernels::GramState,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
