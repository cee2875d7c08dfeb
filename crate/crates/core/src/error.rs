use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("dimension mismatch: expected length {expected}, got {got}")]
pub struct DimensionError {
    pub expected: usize,
    pub got: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PotentialError {
    /// Argument outside the open interval where the singular part is finite.
    #[error("potential evaluated outside (-1, 1) at s = {0}")]
    Domain(f64),
    #[error("scalar root solve did not converge for target {target} after {iterations} iterations")]
    RootSolve { target: f64, iterations: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpacesError {
    #[error(transparent)]
    Dimension(#[from] DimensionError),
    #[error("right-hand side has generalized mean {0:e}, expected zero")]
    NonzeroMean(f64),
    #[error("field violates the trace constraint required for L = 0 (defect {0:e})")]
    TraceConstraint(f64),
    #[error("elliptic system is singular")]
    Singular,
    #[error("coupling parameter L must be finite and nonnegative, got {0}")]
    InvalidCoupling(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvolveError {
    #[error("Newton iteration failed to converge at t = {t}; residual history {history:?}")]
    Newton { t: f64, history: Vec<f64> },
    #[error("loss of separation at t = {t}: node value {value} reached the safeguard")]
    Separation { t: f64, value: f64 },
    #[error("invalid scheme configuration: {0}")]
    Config(String),
    #[error("initial datum invalid: {0}")]
    InitialData(String),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Spaces(#[from] SpacesError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StationaryError {
    #[error("target mass {0} outside (-1, 1)")]
    Mass(f64),
    #[error("initial guess is not strictly separated")]
    Guess,
    #[error(
        "steady Newton failed after {iterations} iterations (residual {residual:e}); \
         try a long evolution run as the initial guess"
    )]
    Newton { iterations: usize, residual: f64 },
    #[error(transparent)]
    Potential(#[from] PotentialError),
}
