//! Dense symmetric linear algebra and 1-D quadrature shared by every other module.

mod cholesky;
mod eigen;
mod matrix;
mod quadrature;

pub use cholesky::{cholesky_jittered, log_det, psd_solve, CholFactor, JitterSchedule};
pub use eigen::symmetric_eigen;
pub use matrix::{Matrix, SymMatrix};
pub use quadrature::{gauss_legendre_rule, integrate, Interval, QuadratureRule, DEFAULT_NODES};
