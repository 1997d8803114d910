use thiserror::Error;

/// Errors raised while decoding the binary file formats.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated stream: needed {needed} bytes, {available} available")]
    Truncated { needed: usize, available: usize },
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("inconsistent shape: {0}")]
    Shape(String),
    #[error("invalid field `{field}`: {reason}")]
    InvalidField { field: &'static str, reason: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for trajectory of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("radar scan covers {covered} m but the descriptor needs {required} m")]
    InsufficientRange { covered: f64, required: f64 },
    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),
    #[error("non-finite gradient encountered in parameter group {0}")]
    NonFiniteGradient(usize),
    #[error("database is empty")]
    EmptyDatabase,
    #[error("duplicate database id {0}")]
    DuplicateId(u64),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
