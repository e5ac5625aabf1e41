use thiserror::Error;

/// Errors produced by the estimation pipeline.
#[derive(Debug, Error)]
pub enum FaceError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not symmetric: max |M - M^T| = {asymmetry:e} exceeds {tolerance:e}")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("matrix is numerically singular: eigenvalue #{index} = {value:e} is below tolerance {tolerance:e}")]
    Singular {
        index: usize,
        value: f64,
        tolerance: f64,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate smoother: 1 - alpha * tr(S) / J = {denominator:e} is not positive")]
    DegenerateSmoother { denominator: f64 },

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("no signal: {0}")]
    NoSignal(String),

    #[error("refused: {0}")]
    TooLarge(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T, E = FaceError> = std::result::Result<T, E>;
