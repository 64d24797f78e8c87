use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("degenerate input: particles {first} and {second} share the initial position {position:?}")]
    DegenerateInput {
        first: usize,
        second: usize,
        position: Vec<f64>,
    },

    #[error("tolerance conflict at t = {time}: clusters within one simultaneity window are {spread} apart (allowed {allowed})")]
    ToleranceConflict { time: f64, spread: f64, allowed: f64 },

    #[error("operation requires dimension {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature could not reach the residual budget {budget:e} (estimated error {estimate:e})")]
    QuadratureBudgetExceeded { budget: f64, estimate: f64 },

    #[error("support of the initial density is not a bounded interval")]
    UnboundedSupport,

    #[error("invalid recipe: {0}")]
    InvalidRecipe(String),

    #[error("cannot parse expression `{input}`: {reason}")]
    Expression { input: String, reason: String },

    #[error("invalid event log: {0}")]
    InvalidEventLog(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
