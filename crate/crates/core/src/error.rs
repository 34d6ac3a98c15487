use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("incompatible quadratic fields: sqrt({0}) vs sqrt({1})")]
    IncompatibleField(u32, u32),

    #[error("division by zero")]
    DivisionByZero,

    #[error("value does not fit in a double: {0}")]
    Overflow(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("dilation mismatch: {0}")]
    DilationMismatch(String),

    #[error("resource limit exceeded: {what} needs {needed}, limit is {limit}")]
    ResourceLimit {
        what: &'static str,
        needed: u64,
        limit: u64,
    },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("normalizer is zero")]
    ZeroNormalizer,

    #[error("degenerate system: {0}")]
    Degenerate(String),

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
