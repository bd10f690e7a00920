use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(
        "matrix is singular: pivot {pivot:e} at index {index} is below threshold {threshold:e}"
    )]
    SingularMatrix {
        index: usize,
        pivot: f64,
        threshold: f64,
    },
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not symmetric: residual {residual:e} exceeds {tol:e}")]
    NotSymmetric { residual: f64, tol: f64 },
    #[error("matrix exponential overflow: {0}")]
    Overflow(String),
    #[error("transformation matrix P is singular")]
    SingularP,
    #[error("P does not bring Q to normal form: off-block residual {residual:e}")]
    NotNormalForm { residual: f64 },
    #[error("invalid relaxation system: {0}")]
    InvalidSystem(String),
    #[error("no symmetrizer found: {0}")]
    NotFound(String),
    #[error("unsupported order q = {0}")]
    UnsupportedOrder(usize),
    #[error("time span {span} is not a whole number of steps of size {dt}")]
    NonIntegerStepCount { span: f64, dt: f64 },
    #[error("field shapes differ: {0}")]
    ShapeMismatch(String),
    #[error("Grad moment system needs M >= 3, got {0}")]
    InvalidM(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
