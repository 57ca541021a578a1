use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    DimensionMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("matrix data has {got} entries, expected {rows}x{cols}")]
    BadLength { rows: usize, cols: usize, got: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("evaluation points {first} and {second} coincide")]
    DuplicatePoints { first: usize, second: usize },

    #[error("evaluation point {index} is off the unit circle (|z| = {modulus})")]
    OffUnitCircle { index: usize, modulus: f64 },

    #[error("linear system is numerically singular (estimated condition number {condition:e})")]
    Singular { condition: f64 },

    #[error("trace has non-negligible imaginary part {imag:e} (real part {real:e})")]
    ComplexTrace { real: f64, imag: f64 },

    #[error("{dim} = {size} is not divisible into {parts} parts")]
    NotDivisible {
        dim: &'static str,
        size: usize,
        parts: usize,
    },

    #[error("ragged block grid: {0}")]
    RaggedGrid(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("not enough responses: got {got}, need {need}")]
    NotEnoughResponses { got: usize, need: usize },

    #[error(
        "exhaustive collusion search over C({n}, {x}) = {count} subsets is too large; \
         use the consecutive strategy"
    )]
    SearchTooLarge { n: usize, x: usize, count: u128 },

    #[error("malformed data: {0}")]
    Malformed(String),

    #[error("worker error (code {code}): {message}")]
    Remote { code: u16, message: String },

    #[error("unknown experiment cell: {0}")]
    UnknownCell(String),

    #[error("I/O error on {path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn mismatch(left: (usize, usize), right: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            left_rows: left.0,
            left_cols: left.1,
            right_rows: right.0,
            right_cols: right.1,
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
