use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid game parameters: {0}")]
    InvalidGame(String),

    #[error("claim {claim} outside the action space [{lower}, {upper}]")]
    ClaimOutOfRange { claim: i64, lower: i64, upper: i64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("integration failed at t = {time}: non-finite state")]
    IntegrationFailure { time: f64 },

    #[error("power iteration stopped after {iterations} iterations with residual {residual:e}")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        /// Best iterate reached before giving up.
        best: Vec<f64>,
    },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("incomplete grid, missing cells: {0}")]
    IncompleteGrid(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("malformed output file: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
