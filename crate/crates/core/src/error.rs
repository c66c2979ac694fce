use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("data row {row}, column `{column}`: {message}")]
    Cell { row: usize, column: String, message: String },

    #[error("data row {row}: expected {expected} cells, found {found}")]
    Arity { row: usize, expected: usize, found: usize },

    #[error("data header does not match schema: {0}")]
    Header(String),

    #[error("variable {index} (`{name}`) is {expected}, got a value of another kind")]
    KindMismatch { index: usize, name: String, expected: &'static str },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("enumeration budget exceeded: {states} states > {budget}")]
    Budget { states: f64, budget: f64 },

    #[error("{0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("model file: {0}")]
    Model(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
