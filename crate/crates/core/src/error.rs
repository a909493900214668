use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("channel row {row} is not a probability vector (sum {sum})")]
    NotStochastic { row: usize, sum: f64 },

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
}

pub type Result<T> = std::result::Result<T, Error>;
