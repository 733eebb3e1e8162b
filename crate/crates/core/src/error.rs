use thiserror::Error;

/// Errors raised by the library.
///
/// Variants split into input-validation failures and numerical failures;
/// [`Error::is_numerical`] tells the two apart.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension must be at least 1")]
    EmptyDimension,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("entry {index} is not finite")]
    NonFinite { index: usize },
    #[error("entry {index} = {value} is negative beyond tolerance")]
    NegativeEntry { index: usize, value: f64 },
    #[error("entries sum to {sum}, not 1 within tolerance {tolerance}")]
    NotNormalized { sum: f64, tolerance: f64 },
    #[error("distribution is not in the interior of the simplex (entry {index} = {value})")]
    NotInterior { index: usize, value: f64 },
    #[error("parameter `{name}` = {value} is out of range: {reason}")]
    ParameterOutOfRange { name: &'static str, value: f64, reason: &'static str },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric at ({i}, {j}): {a} vs {b}")]
    NotSymmetric { i: usize, j: usize, a: f64, b: f64 },
    #[error("invalid matrix entry at ({i}, {j}) = {value}: {reason}")]
    InvalidEntry { i: usize, j: usize, value: f64, reason: &'static str },
    #[error("triangle inequality violated: d({i},{k}) > d({i},{j}) + d({j},{k})")]
    TriangleInequality { i: usize, j: usize, k: usize },
    #[error("invalid hierarchy: {0}")]
    InvalidHierarchy(String),
    #[error("similarity matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    #[error("order alpha = {0} is below 2; divergences need alpha >= 2")]
    AlphaTooSmall(f64),
    #[error("ordinariness entry {index} is not positive")]
    NonPositiveOrdinariness { index: usize },
    #[error("divergence evaluated to {0:e}, below the cancellation floor")]
    NegativeDivergence(f64),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("{0}")]
    InvalidConfig(String),
    #[error("solver did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("routes disagree: {0}")]
    Inconsistent(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Numerical failures: non-convergence, positive-definiteness failures and
    /// internal consistency checks. Everything else is an input error.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::NotPositiveSemidefinite { .. }
                | Error::NegativeDivergence(_)
                | Error::NotConverged { .. }
                | Error::Inconsistent(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
