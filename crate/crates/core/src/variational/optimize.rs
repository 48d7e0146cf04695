//! Gradient ascent on the ELBO over `(μ, L_Σ)`, where `Σ = L_Σ L_Σᵀ` and the
//! diagonal of `L_Σ` is the softplus of an unconstrained parameter.
//!
//! Full-batch runs adapt the step: an ascent step that does not increase the
//! ELBO is rejected and the step halved, an accepted one grows the step by 20%.
//! Minibatch runs use a fixed step on the unbiased estimate
//! `(N/|B|) Σ_{n∈B} ℓ_n − KL`.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::state::{whitened_kl, DataTerms, VariationalState};
use crate::exact::Dataset;
use crate::features::FeatureSet;
use crate::numerics::{cholesky_jittered, CholFactor, Matrix, SymMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    /// Initial (full batch) or fixed (minibatch) step size.
    pub step: f64,
    pub iterations: usize,
    /// `None` means full batch.
    pub batch_size: Option<usize>,
    pub seed: u64,
    /// Full-batch runs stop once the gradient ∞-norm falls below this.
    pub tolerance: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            step: 1e-3,
            iterations: 2000,
            batch_size: None,
            seed: 0,
            tolerance: 1e-8,
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        libm::log1p(libm::exp(x))
    }
}

fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        libm::log(libm::expm1(y))
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// Unconstrained optimizer coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub mean: Vec<f64>,
    /// Lower triangular; the diagonal holds `softplus⁻¹(L_ii)`.
    pub raw_lower: Matrix,
}

impl Params {
    pub fn from_state(vs: &VariationalState) -> Self {
        let mut raw_lower = vs.q().factor().lower().clone();
        for i in 0..raw_lower.rows() {
            raw_lower[(i, i)] = softplus_inv(raw_lower[(i, i)]);
        }
        Self {
            mean: vs.q().mean().to_vec(),
            raw_lower,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `L_Σ`.
    pub fn lower(&self) -> Matrix {
        let mut l = self.raw_lower.clone();
        for i in 0..l.rows() {
            l[(i, i)] = softplus(l[(i, i)]);
        }
        l
    }

    /// `μ` followed by the lower triangle of the raw factor, row by row.
    pub fn to_vec(&self) -> Vec<f64> {
        let m = self.dim();
        let mut v = self.mean.clone();
        for i in 0..m {
            for j in 0..=i {
                v.push(self.raw_lower[(i, j)]);
            }
        }
        v
    }

    pub fn from_vec(m: usize, v: &[f64]) -> Result<Self> {
        let expected = m + m * (m + 1) / 2;
        if v.len() != expected {
            return Err(Error::Shape {
                expected: (expected, 1),
                found: (v.len(), 1),
            });
        }
        let mut raw_lower = Matrix::zeros(m, m);
        let mut k = m;
        for i in 0..m {
            for j in 0..=i {
                raw_lower[(i, j)] = v[k];
                k += 1;
            }
        }
        Ok(Self {
            mean: v[..m].to_vec(),
            raw_lower,
        })
    }

    fn axpy(&self, step: f64, grad: &[f64]) -> Self {
        let v: Vec<f64> = self.to_vec().iter().zip(grad).map(|(p, g)| p + step * g).collect();
        Self::from_vec(self.dim(), &v).expect("gradient has parameter length")
    }
}

/// ELBO as a function of [`Params`] for a fixed feature set and dataset.
#[derive(Debug, Clone)]
pub struct ElboObjective {
    features: FeatureSet,
    c_ll: SymMatrix,
    factor: CholFactor,
    terms: DataTerms,
}

struct Whitened {
    u: Vec<f64>,
    lower: Matrix,
}

impl ElboObjective {
    pub fn new(features: &FeatureSet, ds: &Dataset) -> Result<Self> {
        let c_ll = features.gram()?;
        let factor = cholesky_jittered(&c_ll)?;
        let terms = DataTerms::new(features, &factor, ds)?;
        Ok(Self {
            features: features.clone(),
            c_ll,
            factor,
            terms,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.len() == 0
    }

    fn whiten(&self, p: &Params) -> Result<Whitened> {
        if p.dim() != self.features.len() {
            return Err(Error::Shape {
                expected: (self.features.len(), 1),
                found: (p.dim(), 1),
            });
        }
        Ok(Whitened {
            u: self.factor.solve_lower_vec(&p.mean)?,
            lower: self.factor.forward_solve(&p.lower())?,
        })
    }

    pub fn value(&self, p: &Params) -> Result<f64> {
        let w = self.whiten(p)?;
        Ok(self.terms.elbo(&w.u, &w.lower))
    }

    /// Unbiased minibatch estimate `(N/|B|) Σ_{n∈B} ℓ_n − KL`.
    pub fn value_on(&self, p: &Params, batch: &[usize]) -> Result<f64> {
        let w = self.whiten(p)?;
        let scale = self.len() as f64 / batch.len() as f64;
        let data: f64 = batch.iter().map(|&n| self.terms.point_term(n, &w.u, &w.lower)).sum();
        Ok(scale * data - whitened_kl(&w.u, &w.lower))
    }

    pub fn gradient(&self, p: &Params) -> Result<Vec<f64>> {
        let all: Vec<usize> = (0..self.len()).collect();
        self.gradient_on(p, &all)
    }

    /// Gradient of [`Self::value_on`] with respect to `Params::to_vec` coordinates.
    pub fn gradient_on(&self, p: &Params, batch: &[usize]) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Err(Error::InvalidParameter("empty minibatch"));
        }
        let w = self.whiten(p)?;
        let m = p.dim();
        let noise = self.terms.noise;
        let scale = self.len() as f64 / batch.len() as f64;
        let phi = &self.terms.phi;

        // whitened mean: s Σ φ_n (y_n − φ_nᵀu)/σ² − u
        let mut g_u: Vec<f64> = w.u.iter().map(|v| -v).collect();
        let mut phi_phi_t = Matrix::zeros(m, m);
        for &n in batch {
            let col = phi.column(n);
            let r = self.terms.y[n] - col.iter().zip(&w.u).map(|(a, b)| a * b).sum::<f64>();
            for i in 0..m {
                g_u[i] += scale * col[i] * r / noise;
                for j in 0..m {
                    phi_phi_t[(i, j)] += col[i] * col[j];
                }
            }
        }
        // whitened factor: −(s/σ²) ΦΦᵀ L_S − L_S + L_S⁻ᵀ
        let ls_inv_t = CholFactor::from_lower(w.lower.clone())?
            .lower_inverse()
            .transpose();
        let g_s = (&phi_phi_t * &w.lower)
            .scale(-scale / noise)
            .sub(&w.lower)?
            .add(&ls_inv_t)?;

        // back to (μ, L_Σ): multiply by R⁻ᵀ
        let g_mu = self.factor.backward_solve(&Matrix::column_vector(&g_u))?;
        let g_l = self.factor.backward_solve(&g_s)?;

        let mut out = g_mu.as_slice().to_vec();
        for i in 0..m {
            for j in 0..=i {
                let mut g = g_l[(i, j)];
                if i == j {
                    g *= sigmoid(p.raw_lower[(i, i)]);
                }
                out.push(g);
            }
        }
        Ok(out)
    }

    pub fn state(&self, p: &Params) -> Result<VariationalState> {
        let w = self.whiten(p)?;
        VariationalState::from_whitened(
            self.features.clone(),
            self.c_ll.clone(),
            self.factor.clone(),
            w.u,
            w.lower,
        )
    }
}

/// Shuffled partition of `0..n` into consecutive batches of `batch_size`
/// (the last one may be shorter).
pub fn epoch_batches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch_size.max(1)).map(|c| c.to_vec()).collect()
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub state: VariationalState,
    /// Full-data ELBO before the first iteration and after each iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub accepted: usize,
}

impl OptimizationResult {
    pub fn final_elbo(&self) -> f64 {
        *self.trace.last().expect("trace holds the initial value")
    }
}

/// Maximizes the ELBO starting from `Q = P` (`μ = 0`, `Σ = C_LL`).
pub fn optimize_elbo(fs: &FeatureSet, ds: &Dataset, cfg: &OptimizerConfig) -> Result<OptimizationResult> {
    let init = VariationalState::prior(fs.clone())?;
    optimize_from(&ElboObjective::new(fs, ds)?, Params::from_state(&init), cfg)
}

/// Maximizes the ELBO from explicit starting parameters.
pub fn optimize_from(obj: &ElboObjective, init: Params, cfg: &OptimizerConfig) -> Result<OptimizationResult> {
    if !(cfg.step > 0.0) || !cfg.step.is_finite() {
        return Err(Error::InvalidParameter("optimizer step must be positive"));
    }
    let n = obj.len();
    let batch = cfg.batch_size.unwrap_or(n);
    if batch == 0 || batch > n {
        return Err(Error::InvalidParameter("batch size must lie in 1..=N"));
    }

    let mut params = init;
    let mut current = obj.value(&params)?;
    if !current.is_finite() {
        return Err(Error::Divergence { iteration: 0 });
    }
    let mut trace = alloc::vec![current];
    let mut accepted = 0;
    let mut iterations = 0;

    if batch == n {
        let mut step = cfg.step;
        for it in 1..=cfg.iterations {
            iterations = it;
            let grad = obj.gradient(&params)?;
            if grad.iter().fold(0.0f64, |a, g| a.max(g.abs())) <= cfg.tolerance {
                iterations = it - 1;
                break;
            }
            let candidate = params.axpy(step, &grad);
            match obj.value(&candidate) {
                Ok(v) if v.is_finite() && v >= current => {
                    params = candidate;
                    current = v;
                    accepted += 1;
                    step *= 1.2;
                }
                _ => step *= 0.5,
            }
            trace.push(current);
            if step < f64::EPSILON * cfg.step {
                break;
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut queue: Vec<Vec<usize>> = Vec::new();
        for it in 1..=cfg.iterations {
            iterations = it;
            if queue.is_empty() {
                queue = epoch_batches(n, batch, &mut rng);
                queue.reverse();
            }
            let b = queue.pop().expect("refilled above");
            let grad = obj.gradient_on(&params, &b)?;
            params = params.axpy(cfg.step, &grad);
            current = match obj.value(&params) {
                Ok(v) if v.is_finite() => v,
                _ => return Err(Error::Divergence { iteration: it }),
            };
            accepted += 1;
            trace.push(current);
        }
    }

    Ok(OptimizationResult {
        state: obj.state(&params)?,
        trace,
        iterations,
        accepted,
    })
}
