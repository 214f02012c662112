use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {0:?} lies outside the box")]
    OutOfBox(Vec<i64>),
    #[error("unsupported dimension {got}: {reason}")]
    UnsupportedDimension { got: usize, reason: String },
    #[error("box too large: {0}")]
    Capacity(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("degenerate gaussian kernel: {0}")]
    DegenerateKernel(String),
    #[error("no open path between the requested endpoints")]
    NoPath,
    #[error("negative horizon {0}")]
    NegativeHorizon(f64),
    #[error("box too small for the requested estimate: {0}")]
    InsufficientBox(String),
    #[error("wet set escapes the inner box at time {time}; shrink the horizon")]
    Truncated { time: f64 },
    #[error("degenerate shape: {0}")]
    DegenerateShape(String),
    #[error("model hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("pathwise coupling violated: {0}")]
    CouplingViolation(String),
    #[error("conditioning failed: {0}")]
    Conditioning(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
