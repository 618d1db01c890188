use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("not sectorial of angle < pi/2: {0}")]
    NotSectorial(String),

    #[error("generator is not Hurwitz: eigenvalue with Re >= 0 found ({0})")]
    NonHurwitz(String),

    #[error("matrix function failed: {0}")]
    DefectiveMatrix(String),

    #[error("process and path live on different time grids")]
    GridMismatch,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
