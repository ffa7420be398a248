use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("degenerate split: left={left}, right={right} (each cluster needs at least 2 observations)")]
    DegenerateSplit { left: usize, right: usize },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("duplicate data: {0}")]
    DuplicateData(String),

    #[error("missing baseline for {group}, week {week}")]
    MissingBaseline { group: String, week: u32 },

    #[error("zero baseline median for {group} in {week}; rate undefined")]
    ZeroMedian { group: String, week: String },

    #[error("invalid span: {0}")]
    InvalidSpan(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
