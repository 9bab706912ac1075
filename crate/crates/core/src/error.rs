use thiserror::Error;

/// Errors raised by the tiltlab library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("alphabet must have at least 2 symbols, got {0}")]
    AlphabetTooSmall(usize),
    #[error("alphabet labels must be distinct (duplicate {0:?})")]
    DuplicateLabel(String),
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),
    #[error("operands live on different alphabets or block lengths")]
    AlphabetMismatch,
    #[error("baseline must be strictly positive (symbol {symbol} has mass {mass})")]
    NotStrictlyPositive { symbol: usize, mass: f64 },
    #[error("divergence is infinite: q puts mass on symbol {0} where p has none")]
    InfiniteDivergence(usize),
    #[error("{what} requires {count} entries, above the cap of {cap}")]
    CapExceeded { what: &'static str, count: f64, cap: f64 },
    #[error("invalid moment function: {0}")]
    InvalidMomentFunction(String),
    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),
    #[error("outside convex hull: {0}")]
    BoundaryInfeasible(String),
    #[error("moment solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("tilted covariance is singular; the statistic is affinely degenerate")]
    SingularHessian,
    #[error("no type of size {n} satisfies the constraint{}", smallest_feasible.map(|m| format!(" (smallest feasible n is {m})")).unwrap_or_default())]
    EmptyConstraintSet { n: u64, smallest_feasible: Option<u64> },
    #[error("I-projection is not unique: minimizers {0:?} and {1:?} tie")]
    NonUniqueProjection(Vec<f64>, Vec<f64>),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no proposals were accepted ({proposals} drawn); {advice}")]
    NoAcceptance { proposals: u64, advice: String },
    #[error("rate fit needs positive distances, got {0} at n = {1}")]
    NonPositiveRate(f64, f64),
}

pub type Result<T> = std::result::Result<T, Error>;
