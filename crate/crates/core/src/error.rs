use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Huber radius {0}: must be strictly positive and finite")]
    InvalidRadius(f64),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite cost encountered at iteration {iteration}")]
    NonFiniteCost { iteration: usize },

    #[error("line search step underflowed below {min_step:e}")]
    StepUnderflow { min_step: f64 },

    #[error("position too close to a kink of the cost (margin {margin:e})")]
    NearKink { margin: f64 },

    #[error("cannot initialize from anchor centroid: network has no anchors")]
    NoAnchors,

    #[error("network generation failed: {0}")]
    Generation(String),

    #[error("invalid experiment configuration: {0}")]
    InvalidExperiment(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
