use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Diagnostic payload attached to a failed time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFailure {
    pub step: usize,
    pub time: f64,
    pub last_residual: f64,
    /// Node with the largest |U_i| at the last iterate.
    pub worst_node: usize,
    pub worst_value: f64,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("iterate left the feasible set: {0}")]
    Feasibility(String),

    #[error("prolongation matching failed: {0}")]
    Matching(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("initial data is not admissible: {0}")]
    Admissibility(String),

    #[error(
        "step {} (t = {}) failed: {} (last residual {:.3e}, worst node {} with |U| = {})",
        .0.step, .0.time, .0.reason, .0.last_residual, .0.worst_node, .0.worst_value
    )]
    Step(Box<StepFailure>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
