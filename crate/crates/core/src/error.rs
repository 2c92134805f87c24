use thiserror::Error;

/// Errors raised by the model, discretization and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("lambda infeasible at {lambda}: {reason}")]
    LambdaInfeasible { lambda: f64, reason: String },

    #[error("no feasible lambda on the supplied grid")]
    NoFeasibleLambda,

    #[error("stability conditions violated: {0}")]
    ConditionViolated(String),

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("CFL violation: dt/(tau*drho) = {courant} > 1")]
    Cfl { courant: f64 },

    #[error("history buffer not initialized")]
    Uninitialized,

    #[error("history sampler returned a non-finite value at x = {x}, s = {s}")]
    NonSampleable { x: f64, s: f64 },

    #[error("singular factorization at pivot {index}")]
    Singular { index: usize },

    #[error("numerical blow-up at t = {time}: {what}")]
    BlowUp { time: f64, what: String },

    #[error("dimension {dim} exceeds the dense limit {limit}")]
    TooLarge { dim: usize, limit: usize },

    #[error("eigenvalue computation did not converge")]
    NoConvergence,

    #[error("degenerate fit window: {0}")]
    DegenerateFit(String),

    #[error("too few samples: need at least {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
