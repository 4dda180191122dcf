use thiserror::Error;

use crate::kac::JumpTrajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid dimension {dim}: need at least {min}")]
    InvalidDimension { dim: usize, min: usize },

    #[error("infeasible initial data: |c|^2 = {norm_sq} exceeds radius^2 = {radius_sq}")]
    InfeasibleInitialData { norm_sq: f64, radius_sq: f64 },

    #[error("singular state: projector undefined at the zero vector")]
    SingularState,

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("invalid pair ({i}, {j})")]
    InvalidPair { i: usize, j: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("event budget of {budget} exceeded; {} events simulated", partial.events.len())]
    BudgetExceeded {
        budget: u64,
        partial: Box<JumpTrajectory>,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("too few samples: got {got}, need at least {min}")]
    TooFewSamples { got: usize, min: usize },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::ContractViolation(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
