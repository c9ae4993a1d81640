use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),

    #[error("matrix 1-norm {norm:.3e} exceeds the exponential cap {cap:.3e}")]
    Overflow { norm: f64, cap: f64 },

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("truncation: tail population {population:.3e} exceeds {tolerance:.3e}")]
    Truncation { population: f64, tolerance: f64 },

    #[error("branch singularity: {0}")]
    Branch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular jacobian: {0}")]
    SingularJacobian(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },

    #[error("step rejected: {0}")]
    StepRejected(String),

    #[error("generator not Hermitian at t = {t}: residual {residual:.3e}")]
    NotHermitian { t: f64, residual: f64 },

    #[error("no Dyson map supplied for chain level {0}")]
    MissingMap(i32),

    #[error("gauge link is local: {0}")]
    LocalLink(String),

    #[error("singular point: {0}")]
    Singularity(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
