use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (relative asymmetry {asymmetry:.3e})")]
    NonHermitian { asymmetry: f64 },
    #[error("matrix contains NaN or infinite entries")]
    NonFinite,
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("spectrum below one (min eigenvalue {min_eigenvalue:.3e})")]
    SpectrumBelowOne { min_eigenvalue: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NonPsd { min_eigenvalue: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("channels are already noise-normalized")]
    AlreadyNormalized,
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("insufficient points: {0}")]
    InsufficientPoints(String),
}
