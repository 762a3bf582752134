use thiserror::Error;

/// Errors produced by the analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("division by the zero transfer function")]
    DivisionByZero,

    #[error("evaluation point s = {re}{im:+}i is within tolerance of a pole")]
    PoleProximity { re: f64, im: f64 },

    #[error("limit of s·L(s) is unbounded (relative degree {relative_degree})")]
    UnboundedLimit { relative_degree: i64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("singular Jacobian at Newton iterate {iteration}")]
    SingularJacobian { iteration: usize },

    #[error("iterate left the positive orthant and damping floor was reached")]
    NegativeConcentration,

    #[error("non-finite rate evaluation: {0}")]
    NonFinite(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unstable pole-zero cancellation between controller and plant at {re}{im:+}i")]
    UnstableCancellation { re: f64, im: f64 },

    #[error("improper transfer function (relative degree {0})")]
    Improper(i64),

    #[error("unstable system: {0}")]
    Unstable(String),

    #[error("no stability bracket: both endpoints are {0}")]
    NoBracket(&'static str),

    #[error("matrix exponential overflow; rightmost eigenvalue {re}{im:+}i")]
    ExpOverflow { re: f64, im: f64 },

    #[error("right-half-plane zeros of S do not match the supplied poles of L")]
    AllpassMismatch,
}

pub type Result<T> = std::result::Result<T, Error>;
