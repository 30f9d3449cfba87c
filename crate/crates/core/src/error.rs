use thiserror::Error;

/// Errors raised by grid construction, field validation and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid dimension must be 1 or 2, got {0}")]
    InvalidDimension(usize),

    #[error("grid bounds must be finite with lo < hi, got [{lo}, {hi}]")]
    InvalidBounds { lo: f64, hi: f64 },

    #[error("at least 4 points per axis are required, got {0}")]
    TooFewPoints(usize),

    #[error("field has {got} values but the grid has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value {value} at node {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("density is negative ({value}) at node {index}")]
    NegativeDensity { index: usize, value: f64 },

    #[error("density integrates to {0}, expected 1")]
    NotNormalized(f64),

    #[error("density has zero total mass")]
    ZeroMass,

    #[error("support margin violated: mass {mass_outside:e} outside the inner box exceeds {tol:e}")]
    SupportMargin { mass_outside: f64, tol: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("time must be non-negative and finite, got {0}")]
    InvalidTime(f64),

    #[error("eps must be positive and finite, got {0}")]
    InvalidEps(f64),

    #[error("interpolation time {0} is outside [0, 1]")]
    OutOfRange(f64),

    #[error("operation requires a {expected}-dimensional grid, got {got}")]
    WrongDimension { expected: usize, got: usize },

    #[error("Schrödinger system not converged after {iterations} iterations (residuals {residual0:e}, {residual1:e})")]
    NotConverged {
        iterations: usize,
        residual0: f64,
        residual1: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
