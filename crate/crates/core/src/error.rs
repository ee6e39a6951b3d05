use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid detection: {0}")]
    InvalidDetection(String),

    #[error("degenerate box state: s = {s}, r = {r}")]
    DegenerateState { s: f64, r: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular matrix in {context} (condition estimate {condition:.3e})")]
    Singular { context: &'static str, condition: f64 },

    #[error("matrix of size {size} exceeds the exact-permanent cap of {cap}")]
    Capacity { size: usize, cap: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
