use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    InvalidParams(String),

    #[error("urn index {index} out of range for {n_urns} urns")]
    IndexOutOfRange { index: usize, n_urns: usize },

    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("enumeration instance too large: N*t = {work} exceeds {limit}")]
    InstanceTooLarge { work: u64, limit: u64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-positive value {value} at t = {t}")]
    NonPositive { t: f64, value: f64 },

    #[error("negative variance {value:e} at t = {t}")]
    NegativeVariance { t: u64, value: f64 },

    #[error("statistics schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("work estimate {work} urn-steps exceeds budget {budget}; pass --budget-override to run anyway")]
    BudgetExceeded { work: u128, budget: u128 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
