use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is singular to working precision (pivot {pivot:.3e} at column {column})")]
    Singular { pivot: f64, column: usize },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("matrix sign iteration failed: {0}")]
    SignFailure(String),

    #[error("pair (A, B) is not stabilizable: {0}")]
    NotStabilizable(String),

    #[error("weight matrix must be symmetric positive definite (min eigenvalue {min_eigenvalue:.3e})")]
    WeightNotPositiveDefinite { min_eigenvalue: f64 },

    #[error("invalid edge weight for edge {edge:?}: {weight}")]
    InvalidWeight { edge: (usize, usize), weight: f64 },

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("agent count {0} is too small (need at least 2)")]
    Size(usize),

    #[error("regulation infeasible: {0}")]
    InfeasibleRegulation(String),

    #[error("lambda_max(B B^T) = {lambda_max:.4} exceeds 1, required in strict mode")]
    Precondition { lambda_max: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("simulation diverged at t = {t:.6} s: {reason}")]
    Divergence { t: f64, reason: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("trace I/O: {0}")]
    TraceIo(String),
}
