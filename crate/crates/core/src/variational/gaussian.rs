use alloc::vec::Vec;

use crate::numerics::{cholesky_jittered, CholFactor, Matrix, SymMatrix};
use crate::{Error, Result};

/// `N(mean, cov)` on `ℝ^M`, kept together with a Cholesky factor of `cov`.
#[derive(Debug, Clone)]
pub struct FiniteGaussian {
    mean: Vec<f64>,
    cov: SymMatrix,
    factor: CholFactor,
}

impl FiniteGaussian {
    /// Factors `cov` with the default jitter schedule.
    pub fn new(mean: Vec<f64>, cov: SymMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::Shape {
                expected: (cov.dim(), 1),
                found: (mean.len(), 1),
            });
        }
        if let Some(index) = mean.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "gaussian mean",
                index,
            });
        }
        let factor = cholesky_jittered(&cov)?;
        Ok(Self { mean, cov, factor })
    }

    /// `cov = lower · lowerᵀ` with `lower` used as the factor.
    pub fn from_lower(mean: Vec<f64>, lower: Matrix) -> Result<Self> {
        let factor = CholFactor::from_lower(lower)?;
        if mean.len() != factor.dim() {
            return Err(Error::Shape {
                expected: (factor.dim(), 1),
                found: (mean.len(), 1),
            });
        }
        let cov = SymMatrix::new(factor.reconstruct())?;
        Ok(Self { mean, cov, factor })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &SymMatrix {
        &self.cov
    }

    pub fn factor(&self) -> &CholFactor {
        &self.factor
    }
}

/// `KL(q ‖ p)` between two Gaussians of the same dimension:
/// `½(tr(Σ_p⁻¹Σ_q) + (μ_p − μ_q)ᵀΣ_p⁻¹(μ_p − μ_q) − M + log|Σ_p| − log|Σ_q|)`.
pub fn kl_finite_gaussians(q: &FiniteGaussian, p: &FiniteGaussian) -> Result<f64> {
    if q.dim() != p.dim() {
        return Err(Error::Shape {
            expected: (p.dim(), 1),
            found: (q.dim(), 1),
        });
    }
    let m = q.dim() as f64;
    // tr(Σ_p⁻¹Σ_q) = ‖L_p⁻¹ L_q‖_F²
    let trace = p
        .factor
        .forward_solve(q.factor.lower())?
        .as_slice()
        .iter()
        .map(|v| v * v)
        .sum::<f64>();
    let diff: Vec<f64> = p.mean.iter().zip(&q.mean).map(|(a, b)| a - b).collect();
    let maha = p.factor.quad_form(&diff)?;
    Ok(0.5 * (trace + maha - m + p.factor.log_det() - q.factor.log_det()))
}
