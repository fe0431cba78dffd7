use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max |m_ij - conj(m_ji)| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("trace is not 1 (|Tr - 1| = {deviation:e})")]
    TraceNotOne { deviation: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("dimension {dim} exceeds the cap {cap}")]
    DimensionOverflow { dim: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("eigendecomposition did not converge for a {dim}x{dim} matrix")]
    ConvergenceFailure { dim: usize },

    #[error("invalid Bloch vector at omega = {omega_deg} deg (squared norm {norm_sq})")]
    InvalidBlochVector { omega_deg: f64, norm_sq: f64 },

    #[error("invalid hypothesis set: {0}")]
    InvalidHypothesisSet(String),

    #[error("grid is empty: resolution {resolution_deg} deg exceeds every interval and no points exist")]
    EmptyGrid { resolution_deg: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("transcript is inconsistent: {0}")]
    InconsistentTranscript(String),

    #[error("both SLR processes crossed their thresholds (log Lambda0 = {log_slr0}, log Lambda1 = {log_slr1})")]
    InvariantViolation { log_slr0: f64, log_slr1: f64 },

    #[error("no sensitivity/threshold on the grid meets type I level {eps0}")]
    InfeasibleCalibration { eps0: f64 },

    #[error("enumeration horizon {horizon} exceeds the cap {cap}")]
    HorizonTooLarge { horizon: usize, cap: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
