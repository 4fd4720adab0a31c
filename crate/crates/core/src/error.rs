use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("exponent m[{index}] = {value} is not positive")]
    NonPositiveExponent { index: usize, value: f64 },
    #[error("model hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("scaling parameter c = {0} lies outside the admissible family")]
    OutsideFamily(f64),
    #[error("empty admissibility window on axis {axis}: lower {lower} >= upper {upper}")]
    EmptyWindow { axis: usize, lower: f64, upper: f64 },
    #[error("profile undefined at {0:?}")]
    Singular(Vec<f64>),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("numerical instability at t = {time}: {detail}")]
    Unstable { time: f64, detail: String },
    #[error("check not applicable: {0}")]
    Inapplicable(String),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
