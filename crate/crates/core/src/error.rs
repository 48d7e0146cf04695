use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Interval, location or support outside the admissible domain.
    Domain(&'static str),
    /// Operand shapes do not conform.
    Shape {
        expected: (usize, usize),
        found: (usize, usize),
    },
    /// Non-finite value produced while integrating or evaluating.
    NonFinite { what: &'static str, index: usize },
    /// Cholesky failed even with the largest jitter in the schedule.
    NotPositiveDefinite { jitter: f64 },
    /// More eigenpairs requested than quadrature nodes.
    Capacity { requested: usize, available: usize },
    /// The spectrum is numerically zero.
    Rank,
    /// Invalid parameter value (non-positive lengthscale, empty data, ...).
    InvalidParameter(&'static str),
    /// Optimizer produced a non-finite objective.
    Divergence { iteration: usize },
}

impl Error {
    /// Short machine-readable category.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Shape { .. } => "shape",
            Error::NonFinite { .. } => "numeric",
            Error::NotPositiveDefinite { .. } => "not-positive-definite",
            Error::Capacity { .. } => "capacity",
            Error::Rank => "rank",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::Divergence { .. } => "divergence",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Shape { expected, found } => write!(
                f,
                "shape mismatch: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Error::NonFinite { what, index } => {
                write!(f, "non-finite value in {what} at index {index}")
            }
            Error::NotPositiveDefinite { jitter } => {
                write!(f, "matrix not positive definite (jitter {jitter:e} attempted)")
            }
            Error::Capacity {
                requested,
                available,
            } => write!(
                f,
                "requested {requested} eigenpairs but only {available} quadrature nodes"
            ),
            Error::Rank => write!(f, "degenerate spectrum: all eigenvalues numerically zero"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Divergence { iteration } => {
                write!(f, "objective became non-finite at iteration {iteration}")
            }
        }
    }
}

impl core::error::Error for Error {}
