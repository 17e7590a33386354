use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("degenerate direction: theta is proportional to the all-ones vector")]
    DegenerateDirection,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid variance {0}: must be positive and finite")]
    InvalidVariance(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("non-stationary model: ARCH coefficients sum to {0} (must be < 1)")]
    NonStationary(f64),
    #[error("numeric failure: {0}")]
    NumericFailure(String),
    #[error("unsupported method: {0}")]
    UnsupportedMethod(String),
    #[error("moment table horizon {horizon} is shorter than the required lag {required}")]
    InsufficientTable { horizon: usize, required: usize },
    #[error("empty sample")]
    EmptySample,
    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("unsupported characteristic function: {0}")]
    UnsupportedCf(String),
    #[error("quadrature did not converge (residual {residual:e})")]
    Accuracy { residual: f64 },
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
