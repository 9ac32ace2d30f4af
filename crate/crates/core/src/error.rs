use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension {n} outside the supported range 1..={max}")]
    DimensionOutOfRange { n: usize, max: usize },

    #[error("coordinate {k} outside 1..={n}")]
    CoordinateOutOfRange { k: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("truth table has {got} entries, expected {expected}")]
    TableLength { expected: usize, got: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("noise rate {0} outside [0, 1/2]")]
    NoiseRate(f64),

    #[error("extension target {target} must exceed current dimension {n}")]
    InvalidExtension { n: usize, target: usize },

    #[error("invalid PVR specification: {0}")]
    InvalidPvr(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("input is not a 2n-extension: {0}")]
    NotExtended(String),

    #[error("invalid model configuration: {0}")]
    InvalidModel(String),

    #[error("invalid optimizer configuration: {0}")]
    InvalidOptimizer(String),

    #[error("target is not linear: Fourier weight {0:.3e} above degree 1")]
    NonLinearTarget(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
