use alloc::vec::Vec;

use super::{Matrix, SymMatrix};
use crate::{Error, Result};

/// Relative diagonal jitter levels tried in order until a factorization succeeds.
///
/// Each level is multiplied by the mean diagonal of the input (or by one when
/// the mean diagonal is not positive).
#[derive(Debug, Clone, PartialEq)]
pub struct JitterSchedule {
    pub levels: Vec<f64>,
}

impl Default for JitterSchedule {
    fn default() -> Self {
        Self {
            levels: alloc::vec![0.0, 1e-10, 1e-8, 1e-6, 1e-4],
        }
    }
}

/// Lower Cholesky factor of `A + jitter_used·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholFactor {
    lower: Matrix,
    jitter_used: f64,
}

/// Factors `a`, adding the smallest diagonal jitter from the default schedule
/// that makes the factorization succeed.
///
/// A level succeeds only if the shifted minimum eigenvalue also clears
/// `n·ε·mean(diag)`; below that the elimination error swamps the spectrum.
pub fn cholesky_jittered(a: &SymMatrix) -> Result<CholFactor> {
    CholFactor::with_schedule(a, &JitterSchedule::default())
}

/// `A⁻¹B` by forward and back substitution.
pub fn psd_solve(factor: &CholFactor, b: &Matrix) -> Result<Matrix> {
    factor.solve(b)
}

/// `log det(A + jitter·I)`.
pub fn log_det(factor: &CholFactor) -> f64 {
    factor.log_det()
}

impl CholFactor {
    pub fn with_schedule(a: &SymMatrix, schedule: &JitterSchedule) -> Result<Self> {
        let n = a.dim();
        let mean_diag = if n == 0 { 0.0 } else { a.trace() / n as f64 };
        let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };
        // A shift that leaves the spectrum within rounding distance of zero
        // yields a factor whose inverse is dominated by elimination error.
        let floor = n as f64 * f64::EPSILON * scale;
        let min_eig = if n == 0 { 0.0 } else { a.min_eigenvalue() };
        let mut attempted = 0.0;
        for &level in &schedule.levels {
            attempted = level * scale;
            if min_eig + attempted < floor {
                continue;
            }
            if let Some(lower) = factor_in_place(a, attempted) {
                return Ok(Self {
                    lower,
                    jitter_used: attempted,
                });
            }
        }
        Err(Error::NotPositiveDefinite { jitter: attempted })
    }

    /// Wraps an existing lower-triangular factor with a strictly positive diagonal.
    pub fn from_lower(lower: Matrix) -> Result<Self> {
        let n = lower.rows();
        if lower.cols() != n {
            return Err(Error::Shape {
                expected: (n, n),
                found: lower.shape(),
            });
        }
        for i in 0..n {
            if !(lower[(i, i)] > 0.0) || !lower[(i, i)].is_finite() {
                return Err(Error::NotPositiveDefinite { jitter: 0.0 });
            }
            if (i + 1..n).any(|j| lower[(i, j)] != 0.0) {
                return Err(Error::InvalidParameter("factor must be lower triangular"));
            }
        }
        if !lower.is_finite() {
            return Err(Error::NonFinite {
                what: "cholesky factor",
                index: 0,
            });
        }
        Ok(Self {
            lower,
            jitter_used: 0.0,
        })
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    pub fn dim(&self) -> usize {
        self.lower.rows()
    }

    /// `L Lᵀ`, i.e. the factored matrix including jitter.
    pub fn reconstruct(&self) -> Matrix {
        &self.lower * &self.lower.transpose()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self
            .lower
            .diagonal()
            .iter()
            .map(|d| libm::log(*d))
            .sum::<f64>()
    }

    /// `L⁻¹B`.
    pub fn forward_solve(&self, b: &Matrix) -> Result<Matrix> {
        self.check_rows(b)?;
        let n = self.dim();
        let mut x = b.clone();
        for c in 0..b.cols() {
            for i in 0..n {
                let mut s = x[(i, c)];
                for k in 0..i {
                    s -= self.lower[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s / self.lower[(i, i)];
            }
        }
        Ok(x)
    }

    /// `L⁻ᵀB`.
    pub fn backward_solve(&self, b: &Matrix) -> Result<Matrix> {
        self.check_rows(b)?;
        let n = self.dim();
        let mut x = b.clone();
        for c in 0..b.cols() {
            for i in (0..n).rev() {
                let mut s = x[(i, c)];
                for k in (i + 1)..n {
                    s -= self.lower[(k, i)] * x[(k, c)];
                }
                x[(i, c)] = s / self.lower[(i, i)];
            }
        }
        Ok(x)
    }

    /// `L⁻¹`, lower triangular.
    pub fn lower_inverse(&self) -> Matrix {
        self.forward_solve(&Matrix::identity(self.dim()))
            .expect("identity has conforming shape")
    }

    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        self.backward_solve(&self.forward_solve(b)?)
    }

    /// `L⁻¹b`.
    pub fn solve_lower_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .forward_solve(&Matrix::column_vector(b))?
            .as_slice()
            .to_vec())
    }

    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .solve(&Matrix::column_vector(b))?
            .as_slice()
            .to_vec())
    }

    /// `bᵀ A⁻¹ b` via a single forward solve.
    pub fn quad_form(&self, b: &[f64]) -> Result<f64> {
        let z = self.forward_solve(&Matrix::column_vector(b))?;
        Ok(z.as_slice().iter().map(|v| v * v).sum())
    }

    fn check_rows(&self, b: &Matrix) -> Result<()> {
        if b.rows() != self.dim() {
            return Err(Error::Shape {
                expected: (self.dim(), b.cols()),
                found: b.shape(),
            });
        }
        Ok(())
    }
}

fn factor_in_place(a: &SymMatrix, jitter: f64) -> Option<Matrix> {
    let n = a.dim();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)] + jitter;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = libm::sqrt(d);
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}
