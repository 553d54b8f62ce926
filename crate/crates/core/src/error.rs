use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("malformed npy header field `{field}`: {reason}")]
    Format { field: &'static str, reason: String },

    #[error("fortran-order arrays are not supported")]
    UnsupportedLayout,

    #[error("unsupported dtype `{0}` (expected <f4 or <f8)")]
    UnsupportedDtype(String),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("degenerate reference: {0}")]
    DegenerateReference(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// Process exit code used by the CLI: 3 for I/O failures, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 3,
            _ => 2,
        }
    }
}
