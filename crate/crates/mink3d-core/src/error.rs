//! Error type shared by all toolkit modules.

use std::fmt;

/// Errors produced by volume I/O, calibration, fitting and training.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Volume dimensions, payload length or slice counts disagree.
    DimensionMismatch(String),
    /// A parameter is outside its documented domain (even kernel size, negative sigma, ...).
    InvalidParameter(String),
    /// A file could not be read, written or parsed.
    Io(String),
    /// Input data is degenerate for the requested operation
    /// (coplanar sphere points, zero-variance correlation input, empty training set).
    Degenerate(String),
    /// Iterative optimization diverged; carries the recorded cost trace.
    Diverged { iterations: usize, cost_trace: Vec<f64> },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Io(msg) => write!(f, "i/o error: {msg}"),
            Error::Degenerate(msg) => write!(f, "degenerate input: {msg}"),
            Error::Diverged { iterations, .. } => {
                write!(f, "optimization diverged after {iterations} iterations")
            }
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
