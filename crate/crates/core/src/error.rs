use thiserror::Error;

/// Errors raised by the solvers, samplers and constructions in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument or configuration value is out of its admissible range.
    #[error("invalid input: {0}")]
    Validation(String),
    /// A modelling assumption (positivity, integrability) does not hold.
    #[error("model assumption violated: {0}")]
    ModelViolation(String),
    /// A face is shared by more than two elements.
    #[error("non-manifold mesh: {0}")]
    NonManifold(String),
    /// Factorization breakdown, residual check failure and similar.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Malformed text input (generating vectors, tables).
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}

impl Error {
    /// Prefixes the message with `context`, keeping the error kind.
    pub fn context(self, context: impl std::fmt::Display) -> Error {
        match self {
            Error::Validation(m) => Error::Validation(format!("{context}: {m}")),
            Error::ModelViolation(m) => Error::ModelViolation(format!("{context}: {m}")),
            Error::NonManifold(m) => Error::NonManifold(format!("{context}: {m}")),
            Error::Numerical(m) => Error::Numerical(format!("{context}: {m}")),
            Error::Parse(m) => Error::Parse(format!("{context}: {m}")),
            Error::Io(e) => Error::Io(std::io::Error::new(e.kind(), format!("{context}: {e}"))),
        }
    }
}
