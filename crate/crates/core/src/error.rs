use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not square: {rows} x {cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("index ({row}, {col}) out of range for dimension {n}")]
    IndexOutOfRange { row: usize, col: usize, n: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigensolver did not converge after {restarts} restarts (best residual {best_residual:e}, target {target:e})")]
    NoConvergence {
        restarts: usize,
        best_residual: f64,
        target: f64,
    },

    #[error("vertex {0} is isolated (degree 0)")]
    IsolatedVertex(usize),

    #[error("point {0} is a zero vector; cosine distance undefined")]
    ZeroVector(usize),

    #[error("matrix has no off-diagonal entries")]
    NoOffDiagonal,

    #[error("class {0} has no labeled points")]
    UnlabeledClass(usize),

    #[error("class {class} has {available} points, {requested} requested")]
    InsufficientClass {
        class: usize,
        available: usize,
        requested: usize,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
