use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),
    #[error("lemma violation: {0}")]
    LemmaViolation(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("singular fit: {0}")]
    SingularFit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the `lab` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Capacity(_) | Error::Config(_) | Error::InvalidInput(_) => 2,
            _ => 1,
        }
    }
}
