use alloc::vec::Vec;
use core::f64::consts::PI;

use super::FiniteGaussian;
use crate::exact::{Dataset, ExactPosterior};
use crate::features::{DualElement, FeatureSet};
use crate::numerics::{cholesky_jittered, CholFactor, Matrix, SymMatrix};
use crate::{Error, Result};

/// Variational parameters `(μ, Σ)` for a fixed feature set.
#[derive(Debug, Clone)]
pub struct VariationalState {
    features: FeatureSet,
    q: FiniteGaussian,
    c_ll: SymMatrix,
    c_ll_factor: CholFactor,
    /// `R⁻¹μ`.
    whitened_mean: Vec<f64>,
    /// `R⁻¹ L_Σ`, lower triangular with positive diagonal.
    whitened_lower: Matrix,
}

impl VariationalState {
    pub fn new(features: FeatureSet, q: FiniteGaussian) -> Result<Self> {
        if q.dim() != features.len() {
            return Err(Error::Shape {
                expected: (features.len(), 1),
                found: (q.dim(), 1),
            });
        }
        let c_ll = features.gram()?;
        let c_ll_factor = cholesky_jittered(&c_ll)?;
        let whitened_mean = c_ll_factor.solve_lower_vec(q.mean())?;
        let whitened_lower = c_ll_factor.forward_solve(q.factor().lower())?;
        Ok(Self {
            features,
            q,
            c_ll,
            c_ll_factor,
            whitened_mean,
            whitened_lower,
        })
    }

    /// `Q = P`: `μ = 0`, `Σ = C_LL`.
    pub fn prior(features: FeatureSet) -> Result<Self> {
        let m = features.len();
        let c_ll = features.gram()?;
        let c_ll_factor = cholesky_jittered(&c_ll)?;
        Self::from_whitened(
            features,
            c_ll,
            c_ll_factor,
            alloc::vec![0.0; m],
            Matrix::identity(m),
        )
    }

    pub(crate) fn from_whitened(
        features: FeatureSet,
        c_ll: SymMatrix,
        c_ll_factor: CholFactor,
        whitened_mean: Vec<f64>,
        whitened_lower: Matrix,
    ) -> Result<Self> {
        let r = c_ll_factor.lower();
        let mean = r.mat_vec(&whitened_mean)?;
        let q = FiniteGaussian::from_lower(mean, r * &whitened_lower)?;
        Ok(Self {
            features,
            q,
            c_ll,
            c_ll_factor,
            whitened_mean,
            whitened_lower,
        })
    }

    pub fn features(&self) -> &FeatureSet {
        &self.features
    }

    pub fn q(&self) -> &FiniteGaussian {
        &self.q
    }

    /// `C_LL`.
    pub fn c_ll(&self) -> &SymMatrix {
        &self.c_ll
    }

    pub fn c_ll_factor(&self) -> &CholFactor {
        &self.c_ll_factor
    }

    pub(crate) fn whitened_mean(&self) -> &[f64] {
        &self.whitened_mean
    }

    pub(crate) fn whitened_lower(&self) -> &Matrix {
        &self.whitened_lower
    }

    /// `KL(N(μ, Σ) ‖ N(0, C_LL))`.
    pub fn prior_kl(&self) -> f64 {
        whitened_kl(&self.whitened_mean, &self.whitened_lower)
    }

    /// Mean and covariance of the targets under `Q`:
    /// `C_TL C_LL⁻¹ μ` and `C_TT' + C_TL C_LL⁻¹(Σ − C_LL)C_LL⁻¹ C_LT'`.
    pub fn moments(&self, targets: &[DualElement]) -> Result<(Vec<f64>, SymMatrix)> {
        let v = self
            .c_ll_factor
            .forward_solve(&self.features.target_cross(targets)?.transpose())?;
        let mean = v.tr_mat_vec(&self.whitened_mean)?;
        let w = &self.whitened_lower.transpose() * &v;
        let prior = self.features.target_cov(targets)?;
        let cov = prior
            .sub(&(&v.transpose() * &v))?
            .add(&(&w.transpose() * &w))?;
        Ok((mean, SymMatrix::new(cov)?))
    }

    /// Mean and variance at point locations.
    pub fn predict_points(&self, xs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (m, c) = self.moments(&DualElement::diracs(xs))?;
        Ok((m, c.diagonal()))
    }
}

/// `KL(N(u, L Lᵀ) ‖ N(0, I))`.
pub(crate) fn whitened_kl(u: &[f64], lower: &Matrix) -> f64 {
    let m = u.len() as f64;
    let trace: f64 = lower.as_slice().iter().map(|v| v * v).sum();
    let norm: f64 = u.iter().map(|v| v * v).sum();
    let logdet: f64 = lower.diagonal().iter().map(|d| libm::log(*d)).sum();
    0.5 * (trace + norm - m) - logdet
}

/// Data-dependent pieces of the ELBO that do not depend on `(μ, Σ)`.
#[derive(Debug, Clone)]
pub(crate) struct DataTerms {
    /// `Φ = R⁻¹ C_LD`, `M × N`.
    pub phi: Matrix,
    /// `k(x_n, x_n) − C_{D_n L} C_LL⁻¹ C_{L D_n}`.
    pub residual_var: Vec<f64>,
    pub y: Vec<f64>,
    pub noise: f64,
}

impl DataTerms {
    pub fn new(features: &FeatureSet, factor: &CholFactor, ds: &Dataset) -> Result<Self> {
        let c_ld = features.data_cross(ds.x())?;
        let phi = factor.forward_solve(&c_ld)?;
        let kernel = features.kernel();
        let residual_var = ds
            .x()
            .iter()
            .enumerate()
            .map(|(n, x)| {
                let q: f64 = (0..phi.rows()).map(|m| phi[(m, n)] * phi[(m, n)]).sum();
                kernel.eval(*x, *x) - q
            })
            .collect();
        Ok(Self {
            phi,
            residual_var,
            y: ds.y().to_vec(),
            noise: ds.noise_variance(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    /// Expected log-likelihood of observation `n`:
    /// `log N(y_n | mean_n, σ²) − var_n / (2σ²)`.
    pub fn point_term(&self, n: usize, u: &[f64], lower: &Matrix) -> f64 {
        let m = u.len();
        let mut mean = 0.0;
        for i in 0..m {
            mean += self.phi[(i, n)] * u[i];
        }
        // ‖L_Sᵀ φ_n‖²
        let mut spread = 0.0;
        for j in 0..m {
            let mut s = 0.0;
            for i in j..m {
                s += lower[(i, j)] * self.phi[(i, n)];
            }
            spread += s * s;
        }
        let var = self.residual_var[n] + spread;
        let r = self.y[n] - mean;
        -0.5 * libm::log(2.0 * PI * self.noise) - r * r / (2.0 * self.noise) - var / (2.0 * self.noise)
    }

    pub fn elbo(&self, u: &[f64], lower: &Matrix) -> f64 {
        let data: f64 = (0..self.len()).map(|n| self.point_term(n, u, lower)).sum();
        data - whitened_kl(u, lower)
    }
}

/// Moments of targets under `Q`.
pub fn q_moments(vs: &VariationalState, targets: &[DualElement]) -> Result<(Vec<f64>, SymMatrix)> {
    vs.moments(targets)
}

/// Evidence lower bound
/// `Σ_n [log N(y_n | C_{D_nL}C_LL⁻¹μ, σ²) − (C_{D_nD_n} + C_{D_nL}C_LL⁻¹(Σ − C_LL)C_LL⁻¹C_{LD_n}) / 2σ²]
///  − KL(N(μ, Σ) ‖ N(0, C_LL))`.
pub fn elbo(vs: &VariationalState, ds: &Dataset) -> Result<f64> {
    let terms = DataTerms::new(vs.features(), vs.c_ll_factor(), ds)?;
    Ok(terms.elbo(vs.whitened_mean(), vs.whitened_lower()))
}

/// `KL(Q ‖ posterior) = log p(y) − ELBO`.
pub fn kl_to_posterior(vs: &VariationalState, ds: &Dataset) -> Result<f64> {
    let post = ExactPosterior::fit_with_rule(ds, vs.features().kernel(), vs.features().rule().clone())?;
    Ok(post.log_marginal() - elbo(vs, ds)?)
}

/// Shared pieces of the closed-form optimum.
struct Optimum {
    c_ll: SymMatrix,
    c_ll_factor: CholFactor,
    /// Factor of `σ²I + ΦΦᵀ`.
    inner: CholFactor,
    /// `(σ²I + ΦΦᵀ)⁻¹ Φ y`.
    whitened_mean: Vec<f64>,
    noise: f64,
}

impl Optimum {
    fn new(fs: &FeatureSet, ds: &Dataset) -> Result<Self> {
        let c_ll = fs.gram()?;
        let c_ll_factor = cholesky_jittered(&c_ll)?;
        let phi = c_ll_factor.forward_solve(&fs.data_cross(ds.x())?)?;
        let noise = ds.noise_variance();
        let b = SymMatrix::new((&phi * &phi.transpose()).add_diagonal(noise))?;
        let inner = cholesky_jittered(&b)?;
        let whitened_mean = inner.solve_vec(&phi.mat_vec(ds.y())?)?;
        Ok(Self {
            c_ll,
            c_ll_factor,
            inner,
            whitened_mean,
            noise,
        })
    }

    /// Lower factor of `S* = σ²(σ²I + ΦΦᵀ)⁻¹`.
    fn whitened_lower(&self) -> Result<Matrix> {
        let r_inv = self.inner.lower_inverse();
        let s = (&r_inv.transpose() * &r_inv).scale(self.noise);
        Ok(cholesky_jittered(&SymMatrix::new(s)?)?.lower().clone())
    }
}

/// Closed-form optimum for a zero-mean prior:
/// `μ* = C_LL(σ²C_LL + C_LD C_DL)⁻¹C_LD y`, `Σ* = C_LL(C_LL + σ⁻²C_LD C_DL)⁻¹C_LL`.
pub fn optimal_params(fs: &FeatureSet, ds: &Dataset) -> Result<FiniteGaussian> {
    Ok(optimal_state(fs, ds)?.q)
}

/// The optimal variational state, built without re-whitening `(μ*, Σ*)`.
pub fn optimal_state(fs: &FeatureSet, ds: &Dataset) -> Result<VariationalState> {
    let opt = Optimum::new(fs, ds)?;
    let lower = opt.whitened_lower()?;
    VariationalState::from_whitened(fs.clone(), opt.c_ll, opt.c_ll_factor, opt.whitened_mean, lower)
}

/// Optimal predictive moments evaluated directly:
/// mean `C_TL(σ²C_LL + C_LD C_DL)⁻¹C_LD y`, covariance
/// `C_TT' − C_TL C_LL⁻¹C_LT' + C_TL(C_LL + σ⁻²C_LD C_DL)⁻¹C_LT'`.
pub fn optimal_predict(
    fs: &FeatureSet,
    ds: &Dataset,
    targets: &[DualElement],
) -> Result<(Vec<f64>, SymMatrix)> {
    let opt = Optimum::new(fs, ds)?;
    let v = opt
        .c_ll_factor
        .forward_solve(&fs.target_cross(targets)?.transpose())?;
    let mean = v.tr_mat_vec(&opt.whitened_mean)?;
    // (C_LL + σ⁻²C_LD C_DL)⁻¹ = σ² R⁻ᵀ (σ²I + ΦΦᵀ)⁻¹ R⁻¹
    let w = opt.inner.forward_solve(&v)?;
    let prior = fs.target_cov(targets)?;
    let cov = prior
        .sub(&(&v.transpose() * &v))?
        .add(&(&w.transpose() * &w).scale(opt.noise))?;
    Ok((mean, SymMatrix::new(cov)?))
}
