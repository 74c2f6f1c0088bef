use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("non-finite transform value at s = {0}")]
    NonFiniteTransform(f64),

    #[error(
        "quadrature grid of {points} points exceeds the limit of {limit}; \
         use the Monte Carlo estimator for this many rounds"
    )]
    GridCapacity { points: u128, limit: u128 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("convex program rejected: {0}")]
    NotConvex(String),

    #[error("equality constraints are inconsistent (residual {0:e})")]
    InconsistentEqualities(f64),

    #[error("initial point is infeasible: {0}")]
    InfeasibleInit(String),

    #[error("SCA subproblem infeasible at outer iteration {iteration}")]
    SubproblemInfeasible { iteration: usize },

    #[error("no feasible point on the power grid")]
    NoFeasiblePoint,

    #[error("infeasible for every round count up to {0}")]
    InfeasibleRounds(usize),

    #[error("feasibility is not monotone in the round count: {0}")]
    NonMonotoneFeasibility(String),

    #[error("too many users for exhaustive search: {0} (limit 8)")]
    TooManyUsers(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
