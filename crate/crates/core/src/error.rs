use thiserror::Error;

/// Errors produced by the model, samplers, designs, oracles and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch for `{what}`: expected {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("individual index {index} out of range for cluster of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("individual {0} is already infected; hazard is defined for susceptibles only")]
    AlreadyInfected(usize),

    #[error("cluster has no susceptible individuals")]
    NoSusceptibles,

    #[error("non-finite or non-positive event rate {0}")]
    InvalidRate(f64),

    #[error("tied infection times at t = {0}")]
    TiedInfectionTimes(f64),

    #[error("coupled sampler requires beta == 0 exactly, got {0}")]
    CouplingRequiresNullBeta(f64),

    #[error("block design with p = {p} treats {treated} of {n}; at least one treated and one untreated are required")]
    DegenerateBlockDesign { p: f64, n: usize, treated: usize },

    #[error("conditioning event X_j = {x_j} has probability zero under the design")]
    ZeroProbabilityConditioning { x_j: bool },

    #[error("cluster size {n} exceeds the oracle limit of {max}")]
    ClusterTooLarge { n: usize, max: usize },

    #[error("oracle tolerance not achieved: {0}")]
    ToleranceNotAchieved(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
