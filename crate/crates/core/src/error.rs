use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix contains a non-finite entry")]
    NonFinite,

    #[error("matrix is singular or numerically rank deficient: {0}")]
    Singular(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("channel set already extended (L = {0})")]
    AlreadyExtended(usize),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("scheme design failed: {0}")]
    Design(String),

    #[error("invalid power grid: {0}")]
    InvalidGrid(String),

    #[error("trial {trial} (seed {seed}): {source}")]
    Trial {
        trial: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed document: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
