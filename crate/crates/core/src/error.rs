use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid token: {0}")]
    InvalidToken(String),
    #[error("unknown latency level {0:?}")]
    InvalidLatency(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("invalid alignment: {0}")]
    InvalidAlignment(String),
    #[error("invalid prompt template: {0}")]
    InvalidTemplate(String),
    #[error("parse error at token {index}: {message}")]
    Parse { index: usize, message: String },
    #[error("unscored record {0}")]
    Unscored(String),
    #[error("undefined metric input: {0}")]
    UndefinedInput(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("predictor: {0}")]
    Predictor(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
