use thiserror::Error;

/// Errors raised anywhere in the key-rate pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("trace {found:.12} differs from expected {expected}")]
    Trace { found: f64, expected: f64 },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("region {0} has zero probability mass")]
    EmptyRegion(String),
    #[error("quadrature did not converge: coarse {coarse:.12e}, fine {fine:.12e}")]
    NotConverged { coarse: f64, fine: f64 },
    #[error("linear program `{name}` is {status}")]
    LpFailed { name: String, status: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no Monte-Carlo samples were accepted into region {0}")]
    NoSamples(String),
}

pub type Result<T> = std::result::Result<T, Error>;
