use thiserror::Error;

/// Errors produced anywhere in the library.
///
/// The variants are grouped so that front-ends can map them onto coarse
/// failure classes (see [`Error::class`]).
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented invariant (simplex, finiteness, lengths).
    #[error("validation error: {0}")]
    Validation(String),

    #[error("index {index} out of range for {len} classes")]
    Index { index: usize, len: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// An inconsistent or unknown configuration.
    #[error("config error: {0}")]
    Config(String),

    /// The operation is not defined for this input; the message names an alternative.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Fitting a recalibration map was impossible on the given data.
    #[error("fit error: {0}")]
    Fit(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse failure class used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Unsupported(_) => ErrorClass::Config,
            Error::Validation(_)
            | Error::Index { .. }
            | Error::Parse { .. }
            | Error::Io(_)
            | Error::Json(_) => ErrorClass::Data,
            Error::Fit(_) | Error::Numerical(_) => ErrorClass::Numerical,
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
