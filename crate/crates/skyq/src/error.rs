use std::io;

use thiserror::Error;

/// Crate-wide error type. The variants map onto the CLI exit-code contract:
/// user errors exit 2, load conflicts exit 3, I/O and integrity failures exit 4.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument or value outside its documented domain.
    #[error("{0}")]
    Domain(String),

    /// Query text rejected by the lexer or parser.
    #[error("syntax error at {line}:{col}: {msg}")]
    Parse { line: u32, col: u32, msg: String },

    /// Query is well-formed but cannot be planned against the catalog.
    #[error("plan error: {0}")]
    Plan(String),

    /// Invalid engine, frame, or server configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Chunk load rejected because an object id already exists.
    #[error("duplicate object id {0}: chunk rejected, catalog unchanged")]
    Duplicate(u64),

    /// A stored file failed its magic/CRC validation.
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn plan(msg: impl Into<String>) -> Self {
        Error::Plan(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn integrity(msg: impl Into<String>) -> Self {
        Error::Integrity(msg.into())
    }

    /// Stable process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Parse { .. } | Error::Plan(_) | Error::Config(_) => 2,
            Error::Duplicate(_) => 3,
            Error::Integrity(_) | Error::Io(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
