use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function being evaluated.
    #[error("{what} = {value} is outside the admissible domain ({requirement})")]
    Domain {
        what: &'static str,
        value: f64,
        requirement: &'static str,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Root bracket does not change sign; the caller violated a precondition.
    #[error("root bracket [{lo}, {hi}] does not straddle a root (h(lo) = {h_lo}, h(hi) = {h_hi})")]
    Bracket { lo: f64, hi: f64, h_lo: f64, h_hi: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("column {column} has zero variance after centering")]
    ZeroVariance { column: usize },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("need at least {required} observations, got {found}")]
    TooFewRows { required: usize, found: usize },

    #[error(
        "continuity condition eta <= Phi(alpha)/alpha^2 fails at alpha = {alpha}, eta = {eta} \
         (use the discontinuous mode to solve this cell)"
    )]
    ConditionViolated { alpha: f64, eta: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// A property the algorithm guarantees was observed to fail. Always a bug.
    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: row {row}, column '{column}': cannot parse '{value}' as a number")]
    NonNumeric {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },

    #[error("{path}: target column '{column}' not found in header")]
    MissingColumn { path: PathBuf, column: String },
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, requirement: &'static str) -> Self {
        Error::Domain {
            what,
            value,
            requirement,
        }
    }
}
