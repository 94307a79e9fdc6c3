use thiserror::Error;

use crate::projection::MaxEntSolution;

/// Errors raised by the numerical engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("operator is not Hermitian (max asymmetry {max_asymmetry:.3e} > {tolerance:.1e})")]
    NotHermitian { max_asymmetry: f64, tolerance: f64 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("eigensolver failed to converge on a {dim}x{dim} matrix")]
    ConvergenceFailure { dim: usize },

    #[error("operator is not positive definite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("Hilbert space dimension 2^{n_sites} exceeds the configured maximum {max_dim}")]
    DimOverflow { n_sites: usize, max_dim: usize },

    #[error("geometry {0} requires a reference state")]
    MissingReference(&'static str),

    #[error("probability must be in (0, 1], got {0}")]
    NonPositiveProbability(f64),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("basis is degenerate: effective rank 0")]
    DegenerateBasis,

    #[error("Max-Ent solver did not converge in {iterations} iterations (residual {residual:.3e})", iterations = .0.iterations, residual = .0.residual)]
    MaxIterExceeded(Box<MaxEntSolution>),

    #[error("Max-Ent Jacobian is singular (Gram rank {rank} < {size})")]
    SingularJacobian { rank: usize, size: usize },

    #[error("reference state is not a product state (deviation {deviation:.3e})")]
    NotProductState { deviation: f64 },

    #[error("unsupported number of fermionic modes: {0} (expected 1 to 3)")]
    UnsupportedModeCount(usize),

    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("Gram matrix singular beyond rcond recovery at t = {t}")]
    GramSingular { t: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
