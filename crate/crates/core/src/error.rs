use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix is not Hermitian (max deviation {deviation:e}, tolerance {tolerance:e})")]
    NonHermitian { deviation: f64, tolerance: f64 },

    #[error("non-finite entry at position {0}")]
    NonFinite(usize),

    #[error("cannot normalize a zero vector")]
    ZeroVector,

    #[error("basis is not orthonormal and complete (max deviation {deviation:e}, tolerance {tolerance:e})")]
    NotOrthonormal { deviation: f64, tolerance: f64 },

    #[error("post-selection is (near-)orthogonal to the initial state: |<f|i>|^2 = {overlap:e}")]
    OrthogonalPostSelection { overlap: f64 },

    #[error("post-selection starved: outcome probability {prob:e} below 1e-12")]
    PostSelectionStarved { prob: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("extrapolation needs at least 3 distinct couplings no larger than 0.5 sigma, got {0}")]
    InsufficientCouplings(usize),

    #[error("cardinality mismatch: expected {expected}, got {got}")]
    Cardinality { expected: usize, got: usize },

    #[error("scenario{}{}: {message}", if path.is_empty() { "" } else { " field " }, path)]
    Scenario { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
