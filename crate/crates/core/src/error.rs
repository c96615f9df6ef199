use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sensor count {0} is not a perfect square")]
    NonSquareSensorCount(usize),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("communication graph is disconnected (deployment seed {seed})")]
    Disconnected { seed: u64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("need at least {needed} particles, got {got}")]
    TooFewParticles { needed: usize, got: usize },

    #[error("innovation variance must be positive, got {0}")]
    NonPositiveInnovation(f64),

    #[error("empty series")]
    EmptySeries,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),
}
