use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),

    #[error("letter index {0} out of range for alphabet of size {1}")]
    LetterOutOfRange(i32, usize),

    #[error("declared class is inconsistent with relators: {0}")]
    ClassMismatch(String),

    #[error("elements belong to different presentations")]
    AlphabetMismatch,

    #[error("operation `{0}` is not supported for class {1}")]
    UnsupportedClass(&'static str, String),

    #[error("resource limit exceeded: {what} would exceed the configured cap of {limit}")]
    ResourceLimit { what: String, limit: usize },

    #[error("matrix dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix assigned to generator `{0}` is singular but an inverse letter occurs")]
    SingularMatrix(String),

    #[error("SDP level {level} is below the word-length radius {radius} of the element")]
    LevelTooSmall { level: usize, radius: usize },

    #[error("semidefinite solver failed: {0}")]
    Sdp(String),

    #[error("certification failed: {0}")]
    Certification(String),

    #[error("quotient does not satisfy all relators")]
    QuotientInvalid,

    #[error("element is not self-adjoint")]
    NotSelfAdjoint,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
