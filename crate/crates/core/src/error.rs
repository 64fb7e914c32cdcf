use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape error: expected {expected}, found {found}")]
    Shape { expected: String, found: String },

    #[error("input error: {0}")]
    Input(String),

    #[error("capacity error: architecture has {count} paths, cap is {cap}")]
    Capacity { count: u128, cap: usize },

    #[error("rank-deficient system for output {output}: {detail}; use ridge > 0")]
    RankDeficient { output: usize, detail: String },

    #[error("format error at {location}: {msg}")]
    Format { location: String, msg: String },

    #[error("unsupported format version `{0}` (expected GLAI/1)")]
    Version(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(expected: impl ToString, found: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn at_line(line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            location: format!("line {line}"),
            msg: msg.into(),
        }
    }

    pub(crate) fn at_offset(offset: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            location: format!("byte offset {offset}"),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
