//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: bad shapes, unbound variables, invalid configuration values.
    #[error("structural error: {0}")]
    Structural(String),

    /// Arithmetic left the representable domain: division by zero, overflow,
    /// non-convergent iteration, blow-up.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Invalid experiment configuration file or CLI arguments.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
