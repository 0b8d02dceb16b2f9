//! Crate-wide error type.

/// Errors produced by meshing, assembly and the solvers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("mesh quality failure: {0}")]
    MeshQuality(String),
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("lambda = {lambda} exceeds lambda(N) = {max}")]
    LambdaOutOfRange { lambda: f64, max: f64 },
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error("eigensolver failed: {0}")]
    Eigen(String),
    #[error("non-convergence: {0}")]
    NonConvergence(String),
    #[error("control problem: {0}")]
    Hum(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
