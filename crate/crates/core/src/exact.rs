//! Exact regression: posterior moments of any dual elements given noisy
//! point observations, and the log marginal likelihood. The prior mean is zero.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::features::{covariance, cross_covariance, DualElement};
use crate::kernels::{check_locations, Kernel};
use crate::numerics::{
    cholesky_jittered, gauss_legendre_rule, CholFactor, Interval, Matrix, QuadratureRule,
    SymMatrix, DEFAULT_NODES,
};
use crate::{Error, Result};

/// Observations `y_n = F(x_n) + ε_n`, `ε_n ~ N(0, σ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    domain: Interval,
    x: Vec<f64>,
    y: Vec<f64>,
    noise_variance: f64,
}

impl Dataset {
    pub fn new(domain: Interval, x: Vec<f64>, y: Vec<f64>, noise_variance: f64) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidParameter("no observations"));
        }
        if x.len() != y.len() {
            return Err(Error::Shape {
                expected: (x.len(), 1),
                found: (y.len(), 1),
            });
        }
        if !(noise_variance > 0.0) || !noise_variance.is_finite() {
            return Err(Error::InvalidParameter("noise variance must be positive"));
        }
        check_locations(&domain, &x)?;
        if let Some(index) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "target",
                index,
            });
        }
        Ok(Self {
            domain,
            x,
            y,
            noise_variance,
        })
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Subset of observations by index, same noise and domain.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        Self::new(
            self.domain,
            idx.iter().map(|&i| self.x[i]).collect(),
            idx.iter().map(|&i| self.y[i]).collect(),
            self.noise_variance,
        )
    }

    /// `C_DD + σ² I`.
    pub(crate) fn noisy_gram(&self, kernel: &Kernel, rule: &QuadratureRule) -> Result<SymMatrix> {
        let c_dd = covariance(&DualElement::diracs(&self.x), kernel, rule)?;
        SymMatrix::new(c_dd.add_diagonal(self.noise_variance))
    }
}

/// Posterior of the zero-mean prior given a dataset.
#[derive(Debug, Clone)]
pub struct ExactPosterior {
    dataset: Dataset,
    kernel: Kernel,
    rule: QuadratureRule,
    factor: CholFactor,
    alpha: Vec<f64>,
}

impl ExactPosterior {
    /// Fits with a default-size Gauss–Legendre rule on the data domain, used
    /// when predicting function-valued elements.
    pub fn fit(ds: &Dataset, kernel: &Kernel) -> Result<Self> {
        let rule = gauss_legendre_rule(ds.domain(), DEFAULT_NODES)?;
        Self::fit_with_rule(ds, kernel, rule)
    }

    pub fn fit_with_rule(ds: &Dataset, kernel: &Kernel, rule: QuadratureRule) -> Result<Self> {
        let factor = cholesky_jittered(&ds.noisy_gram(kernel, &rule)?)?;
        let alpha = factor.solve_vec(ds.y())?;
        Ok(Self {
            dataset: ds.clone(),
            kernel: *kernel,
            rule,
            factor,
            alpha,
        })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn factor(&self) -> &CholFactor {
        &self.factor
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// Posterior mean `C_TD α` and covariance
    /// `C_TT' − C_TD (C_DD + σ²I)⁻¹ C_DT'` for the targets.
    pub fn predict(&self, targets: &[DualElement]) -> Result<(Vec<f64>, SymMatrix)> {
        let data = DualElement::diracs(self.dataset.x());
        let c_td = cross_covariance(targets, &data, &self.kernel, &self.rule)?;
        let mean = c_td.mat_vec(&self.alpha)?;
        let v = self.factor.forward_solve(&c_td.transpose())?;
        let prior = covariance(targets, &self.kernel, &self.rule)?;
        let cov = prior.sub(&(&v.transpose() * &v))?;
        Ok((mean, SymMatrix::new(cov)?))
    }

    /// Posterior mean and variance at point locations.
    pub fn predict_points(&self, xs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (mean, cov) = self.predict(&DualElement::diracs(xs))?;
        Ok((mean, cov.diagonal()))
    }

    /// `log N(y | 0, C_DD + σ²I)`.
    pub fn log_marginal(&self) -> f64 {
        let n = self.dataset.len() as f64;
        let fit: f64 = self
            .dataset
            .y()
            .iter()
            .zip(&self.alpha)
            .map(|(y, a)| y * a)
            .sum();
        -0.5 * (fit + self.factor.log_det() + n * libm::log(2.0 * PI))
    }
}

/// Posterior moments of `targets`.
pub fn predict_exact(post: &ExactPosterior, targets: &[DualElement]) -> Result<(Vec<f64>, SymMatrix)> {
    post.predict(targets)
}

/// Log marginal likelihood `log p(y)`.
pub fn log_marginal(ds: &Dataset, kernel: &Kernel) -> Result<f64> {
    Ok(ExactPosterior::fit(ds, kernel)?.log_marginal())
}

/// Prior covariance of point locations plus noise, exposed for callers that
/// need the matrix itself (PSD checks, reports).
pub fn noisy_data_covariance(ds: &Dataset, kernel: &Kernel) -> Result<Matrix> {
    let rule = gauss_legendre_rule(ds.domain(), 1)?;
    Ok(ds.noisy_gram(kernel, &rule)?.into_matrix())
}
