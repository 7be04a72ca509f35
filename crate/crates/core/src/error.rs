use thiserror::Error;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
    Io,
}

impl ErrorClass {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorClass::Validation => 1,
            ErrorClass::Numerical => 2,
            ErrorClass::Io => 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("dataset failed validation: {0}")]
    Validation(String),

    #[error("empty group {0}")]
    EmptyGroup(String),

    #[error("row {row}: column `{column}` holds unknown level `{level}`")]
    UnknownLevel {
        row: usize,
        column: String,
        level: String,
    },

    #[error("row {row}: outcome {value} is not strictly positive, log transform impossible")]
    NonPositiveOutcome { row: usize, value: f64 },

    #[error("row {row}: column `{column}` is missing")]
    MissingCell { row: usize, column: String },

    #[error("row {row}: column `{column}` is not numeric (`{value}`)")]
    NotNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("design is rank deficient; linearly dependent columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("too few observations: n = {n} but {columns} columns need n > {columns}")]
    TooFewObservations { n: usize, columns: usize },

    #[error("column labels differ between groups: {}", .columns.join(", "))]
    LabelMismatch { columns: Vec<String> },

    #[error("bootstrap failed: {discarded} of {total} replicates were rank deficient (limit 10%)")]
    BootstrapDegenerate { discarded: usize, total: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("correspondence analysis: {0}")]
    Mca(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::RankDeficient { .. }
            | Error::TooFewObservations { .. }
            | Error::BootstrapDegenerate { .. }
            | Error::Mca(_) => ErrorClass::Numerical,
            Error::Io(_) => ErrorClass::Io,
            Error::Csv(e) if e.is_io_error() => ErrorClass::Io,
            _ => ErrorClass::Validation,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
