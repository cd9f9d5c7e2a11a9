use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("numerical blow-up during propagation at t = {time:.3} s")]
    NumericalBlowUp { time: f64 },

    #[error("position norm is zero")]
    ZeroPosition,

    #[error("degenerate chief state: angular momentum is zero")]
    DegenerateChief,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("observation dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training diverged at iteration {iteration}: {detail}")]
    Diverged { iteration: usize, detail: String },

    #[error("unsupported policy file version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("malformed policy file: {0}")]
    MalformedPolicy(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
