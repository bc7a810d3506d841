use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    Dimension(String),

    #[error("parameter out of range: {0}")]
    OutOfDomain(String),

    #[error("length mismatch: expected {expected}, got {got} ({what})")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("could not realise minimal separation {delta} for {count} features after {attempts} attempts")]
    InfeasibleSeparation {
        delta: f64,
        count: usize,
        attempts: usize,
    },

    #[error("signal has zero norm")]
    ZeroSignal,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
