use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An explicit coefficient sequence was indexed past its stored length.
    #[error("coefficient index {index} out of range (stored length {len})")]
    OutOfRange { index: usize, len: usize },

    /// A root finder or iterative solver did not converge.
    #[error("{op}: solver did not converge, final bracket [{lo:e}, {hi:e}], residual {residual:e}")]
    Solver {
        op: &'static str,
        lo: f64,
        hi: f64,
        residual: f64,
    },

    /// Adaptive quadrature did not reach the requested tolerance.
    #[error("{op}: quadrature failed, achieved error {achieved:e} (requested {requested:e})")]
    Quadrature {
        op: &'static str,
        achieved: f64,
        requested: f64,
    },

    /// The predictive method cannot provide the requested quantity.
    #[error("unsupported method: {0}")]
    Unsupported(String),

    /// Not enough samples to form the requested summary.
    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("io error: {0}")]
    Io(String),
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

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
