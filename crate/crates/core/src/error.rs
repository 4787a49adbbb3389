use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("dense tensor with {entries} entries exceeds the cap of {cap}")]
    TooLarge { entries: usize, cap: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("structure violation: {tie} differs by {discrepancy:e}")]
    StructureViolation { tie: String, discrepancy: f64 },

    #[error("invalid transform: {0}")]
    InvalidTransform(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("decomposition does not verify: residual {0:e}")]
    NotVerified(f64),

    #[error("discretization failed: {0}")]
    Discretize(crate::discretize::DiscretizeFailure),

    #[error("malformed PD file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
