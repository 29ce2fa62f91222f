use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("infeasible configuration")]
    InfeasibleConfiguration,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dimension mismatch: expected {expected} spin values, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid boundary condition: {0}")]
    InvalidBoundary(String),
    #[error("empty ensemble")]
    EmptyEnsemble,
    #[error("oracle guard: {vertices} vertices exceeds the limit of {limit}")]
    OracleGuard { vertices: u64, limit: u64 },
    #[error("degenerate law")]
    DegenerateLaw,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("envelopes require λ < 1 (got λ = {0})")]
    EnvelopesRequireSubcritical(f64),
    #[error("b below asymptotic guard: b = {b} < {min}")]
    AsymptoticGuard { b: u32, min: u32 },
    #[error("no samples: sweeps must exceed burn-in")]
    NoSamples,
    #[error("guard violation: {0}")]
    GuardViolation(String),
}
