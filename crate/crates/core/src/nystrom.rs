//! Kernel ridge regression restricted to `span{Cμ_m}`, where `Cμ_m(x) =
//! Cov(F(x), L_m F)` is the covariance function of feature `m`.
//!
//! With `K_ℳX = C_LD` and `K_ℳℳ = C_LL`, the minimizer of
//! `J(α) = (1/N) Σ_n (y_n − Σ_m α_m Cμ_m(x_n))² + λ ‖Σ_m α_m Cμ_m‖²_k`
//! is `α = (K_ℳX K_Xℳ + Nλ K_ℳℳ)⁻¹ K_ℳX y`. For `σ² = Nλ` the fitted function
//! coincides with the optimal variational mean.

use alloc::vec::Vec;

use crate::exact::Dataset;
use crate::features::{DualElement, FeatureSet};
use crate::numerics::{cholesky_jittered, Matrix, SymMatrix};
use crate::variational::optimal_predict;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct NystromModel {
    features: FeatureSet,
    lambda: f64,
    alpha: Vec<f64>,
    objective: f64,
}

impl NystromModel {
    pub fn fit(fs: &FeatureSet, ds: &Dataset, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter("regularizer must be positive"));
        }
        let k_mx = fs.data_cross(ds.x())?;
        let k_mm = fs.gram()?;
        let n = ds.len() as f64;
        let system = (&k_mx * &k_mx.transpose()).add(&k_mm.scale(n * lambda))?;
        let factor = cholesky_jittered(&SymMatrix::new(system)?)?;
        let alpha = factor.solve_vec(&k_mx.mat_vec(ds.y())?)?;
        let objective = ridge_objective(&k_mx, &k_mm, ds.y(), lambda, &alpha)?;
        Ok(Self {
            features: fs.clone(),
            lambda,
            alpha,
            objective,
        })
    }

    /// A model with given coefficients (no fitting).
    pub fn with_coefficients(fs: &FeatureSet, lambda: f64, alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() != fs.len() {
            return Err(Error::Shape {
                expected: (fs.len(), 1),
                found: (alpha.len(), 1),
            });
        }
        Ok(Self {
            features: fs.clone(),
            lambda,
            alpha,
            objective: f64::NAN,
        })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `J(α)` at the fitted coefficients.
    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn features(&self) -> &FeatureSet {
        &self.features
    }

    /// `f̂(x) = Σ_m α_m Cμ_m(x)` at each location.
    pub fn predict(&self, xs: &[f64]) -> Result<Vec<f64>> {
        self.features.data_cross(xs)?.tr_mat_vec(&self.alpha)
    }
}

/// `J(α) = (1/N)‖y − K_Xℳ α‖² + λ αᵀ K_ℳℳ α`.
pub fn ridge_objective(
    k_mx: &Matrix,
    k_mm: &Matrix,
    y: &[f64],
    lambda: f64,
    alpha: &[f64],
) -> Result<f64> {
    let fitted = k_mx.tr_mat_vec(alpha)?;
    let n = y.len() as f64;
    let risk: f64 = y
        .iter()
        .zip(&fitted)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    let k_alpha = k_mm.mat_vec(alpha)?;
    let penalty: f64 = alpha.iter().zip(&k_alpha).map(|(a, b)| a * b).sum();
    Ok(risk + lambda * penalty)
}

/// `J(α)` for arbitrary coefficients on a feature set and dataset.
pub fn krr_objective(fs: &FeatureSet, ds: &Dataset, lambda: f64, alpha: &[f64]) -> Result<f64> {
    ridge_objective(&fs.data_cross(ds.x())?, fs.gram()?.as_matrix(), ds.y(), lambda, alpha)
}

pub fn krr_nystrom_fit(fs: &FeatureSet, ds: &Dataset, lambda: f64) -> Result<NystromModel> {
    NystromModel::fit(fs, ds, lambda)
}

pub fn krr_predict(model: &NystromModel, xs: &[f64]) -> Result<Vec<f64>> {
    model.predict(xs)
}

/// `max_x |f̂(x) − m_Q*(x)|` over `grid` with `λ = σ²/N`.
pub fn equivalence_gap(fs: &FeatureSet, ds: &Dataset, grid: &[f64]) -> Result<f64> {
    equivalence_gap_with_lambda(fs, ds, grid, ds.noise_variance() / ds.len() as f64)
}

/// As [`equivalence_gap`] with an arbitrary regularizer, for control experiments.
pub fn equivalence_gap_with_lambda(
    fs: &FeatureSet,
    ds: &Dataset,
    grid: &[f64],
    lambda: f64,
) -> Result<f64> {
    let krr = NystromModel::fit(fs, ds, lambda)?.predict(grid)?;
    let (mean, _) = optimal_predict(fs, ds, &DualElement::diracs(grid))?;
    Ok(krr
        .iter()
        .zip(&mean)
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs())))
}
