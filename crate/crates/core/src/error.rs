use thiserror::Error;

#[derive(Debug, Error)]
pub enum QctrlError {
    #[error("matrix is not Hermitian (max deviation {max_dev:.3e} exceeds tolerance {tol:.3e})")]
    NotHermitian { max_dev: f64, tol: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sequence length mismatch: expected {expected} steps, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("field strength {value} outside [-{h_max}, {h_max}]")]
    FieldOutOfRange { value: f64, h_max: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("sequence space too large: {size} evaluations exceed cap {cap}")]
    SpaceTooLarge { size: u128, cap: u64 },

    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("stored reward {stored} does not match recomputed {recomputed}")]
    RewardMismatch { stored: f64, recomputed: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, QctrlError>;
