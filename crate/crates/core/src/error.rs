use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: chain needs at least 2 sites, got {0}")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("index out of range: {0}")]
    InvalidIndex(String),

    #[error("singular coefficient: {0}")]
    SingularCoefficient(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
