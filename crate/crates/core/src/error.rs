use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a mathematical precondition (wrong dimension,
    /// out-of-range value, non-finite input, empty dataset, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A privacy budget was used in a context its mode does not permit.
    #[error("privacy mode error: {0}")]
    Mode(String),

    /// An experiment configuration is invalid; `key` names the offending entry.
    #[error("config error: key `{key}`: {message}")]
    Config { key: String, message: String },

    /// A data file could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn mode(msg: impl Into<String>) -> Self {
        Error::Mode(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
