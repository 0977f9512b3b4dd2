use thiserror::Error;

/// Everything that can go wrong inside the library.
///
/// The variants are grouped so that a front end can map them onto a small
/// set of exit codes: bad input, provable nonexistence, numerical failure.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("inadmissible parameter `{param}`: {reason}")]
    Inadmissible { param: &'static str, reason: String },

    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("root bracketing exhausted: {0}")]
    BracketExhausted(String),

    #[error("no convergence after {iterations} iterations: {what}")]
    NoConvergence { what: String, iterations: usize },

    #[error("flow diverged at step {step}: {reason}")]
    Diverged { step: usize, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn inadmissible(param: &'static str, reason: impl Into<String>) -> Self {
        Error::Inadmissible {
            param,
            reason: reason.into(),
        }
    }

    /// Coarse classification used by the CLI exit-code contract.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Inadmissible { .. } | Error::RegimeMismatch(_) => ErrorKind::BadInput,
            Error::NoSolution(_) => ErrorKind::Nonexistence,
            Error::Io(_) => ErrorKind::Io,
            _ => ErrorKind::Numerical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    BadInput,
    Nonexistence,
    Numerical,
    Io,
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
