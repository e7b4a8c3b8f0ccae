use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index set size overflow for d={d}, p={p}")]
    SizeOverflow { d: usize, p: usize },

    #[error("degree {degree} exceeds triple tensor cap {cap}")]
    CapExceeded { degree: usize, cap: usize },

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("eigensolver: {0}")]
    Eigen(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("{solver} did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("incompatible right-hand side: |Rᵀb| = {violation:e} exceeds {tolerance:e}·|b|")]
    Incompatible { violation: f64, tolerance: f64 },

    #[error("degenerate factor: {0}")]
    DegenerateFactor(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("size guard: {what} = {size} exceeds limit {limit}")]
    SizeGuard {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("configuration: {0}")]
    Config(String),

    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
