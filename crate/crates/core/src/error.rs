use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("unknown label value `{0}` (expected -1/1 or 0/1)")]
    UnknownLabelValue(String),
    #[error("empty input file")]
    EmptyFile,
    #[error("train fraction {0} out of range (0, 1) or train set too small")]
    FractionOutOfRange(f64),
    #[error("protected group (a={a}, y={y}) is empty")]
    EmptyProtectedGroup { a: u8, y: i8 },
    #[error("empty marginal cell (a={a}, y={y})")]
    EmptyCell { a: u8, y: i8 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("CVaR level {0} out of range (0, 1]")]
    LevelOutOfRange(f64),
    #[error("infeasible model specification: {0}")]
    InfeasibleSpec(String),
    #[error("flip budget gamma {0} out of range [0, 1]")]
    GammaOutOfRange(f64),
    #[error("point is not a valid strictly positive simplex point: {0}")]
    BadSimplexPoint(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("numerical failure in solver: {0}")]
    NumericalFailure(String),
    #[error("program metadata is missing tags: {0}")]
    MissingTags(String),
    #[error("invalid model spec: {0}")]
    BadSpec(String),
    #[error("invalid conic program: {0}")]
    InvalidProgram(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
