use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("variable lists differ: {left:?} vs {right:?}")]
    VariableMismatch { left: Vec<String>, right: Vec<String> },

    #[error("Taylor models are defined over different domains")]
    DomainMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("degenerate box dimension {dim}: [{lo}, {hi}]")]
    DegenerateDimension { dim: usize, lo: f64, hi: f64 },

    #[error("network file, line {line}: {msg}")]
    NetworkFormat { line: usize, msg: String },

    #[error("expression error at byte {offset}: {msg}")]
    Expr { offset: usize, msg: String },

    #[error("unbound variable `{0}`")]
    UnboundVariable(String),

    #[error("system config error at {path}: {msg}")]
    Config { path: String, msg: String },

    #[error("sampling partition needs {cells} cells, above the limit of {limit}")]
    SamplingBudget { cells: f64, limit: usize },

    #[error("integration failed at t = {time}: {msg}")]
    Integration { time: f64, msg: String },

    #[error("simulation diverged at t = {time}")]
    Divergence { time: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
