use thiserror::Error;

/// Errors raised by the SpAMM library and its benchmark harness.
#[derive(Debug, Error)]
pub enum SpammError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index ({row}, {col}) out of range for {rows}x{cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("non-finite value {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("leaf size {0} is not a power of two")]
    LeafSizeNotPowerOfTwo(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear index overflow: block ({row}, {col}) does not fit a 64-bit key")]
    IndexOverflow { row: u64, col: u64 },

    #[error("quadtree depths differ: {0} vs {1}")]
    DepthMismatch(u32, u32),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("plan does not belong to the given operands (stale handles)")]
    StalePlan,

    #[error("matrix market format error on line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("binary dump error: {0}")]
    Dump(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SpammError {
    /// True for failures caused by the filesystem rather than by bad input.
    pub fn is_io(&self) -> bool {
        match self {
            SpammError::Io(_) => true,
            SpammError::Csv(e) => matches!(e.kind(), csv::ErrorKind::Io(_)),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, SpammError>;
