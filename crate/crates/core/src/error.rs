use thiserror::Error;

/// Every failure the library can report. Domain errors carry the name of the
/// operation that rejected its input so callers can surface provenance.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FbmError {
    #[error("{op}: {msg}")]
    Domain { op: &'static str, msg: String },

    #[error("quadrature did not converge after {subdivisions} subdivisions (estimate {estimate:e}, error {error:e})")]
    Quadrature {
        subdivisions: usize,
        estimate: f64,
        error: f64,
    },

    #[error("coefficient ({row},{col}): {source}")]
    Cell {
        row: usize,
        col: usize,
        #[source]
        source: Box<FbmError>,
    },

    #[error("{op}: exponent {exponent} exceeds the overflow limit of 700")]
    Overflow { op: &'static str, exponent: f64 },

    #[error("covariance factorization failed after jitter {jitter:e}")]
    Factorization { jitter: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl FbmError {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        FbmError::Domain {
            op,
            msg: msg.into(),
        }
    }

    /// Short module tag used in report envelopes.
    pub fn provenance(&self) -> &'static str {
        match self {
            FbmError::Domain { op, .. } | FbmError::Overflow { op, .. } => op,
            FbmError::Quadrature { .. } => "kernel",
            FbmError::Cell { .. } | FbmError::Factorization { .. } => "sampler",
            FbmError::Config(_) | FbmError::Io(_) => "harness",
        }
    }
}

impl From<std::io::Error> for FbmError {
    fn from(e: std::io::Error) -> Self {
        FbmError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FbmError>;
