use thiserror::Error;

/// Errors produced by the factorizations, generators and extractors.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not positive semi-definite: pivot {pivot:e} at index {index} (threshold {threshold:e})")]
    NotPsd {
        index: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("invalid spectrum: {0}")]
    Spectrum(String),

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("rank deficiency: {0}")]
    Rank(String),

    #[error("basis is not orthonormal: defect {defect:e} exceeds {tolerance:e}")]
    NotOrthonormal { defect: f64, tolerance: f64 },

    #[error("index {index} out of range for size {size}")]
    Index { index: usize, size: usize },

    #[error("refused: {0}")]
    Refused(String),

    #[error("malformed matrix file: {0}")]
    Format(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
