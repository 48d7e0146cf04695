//! Stationary kernels on an interval, the integral operator
//! `(T_k f)(x) = ∫ k(x, t) f(t) dt`, and its quadrature (Nyström) eigensystem.

use alloc::vec::Vec;

use crate::numerics::{symmetric_eigen, Interval, Matrix, QuadratureRule, SymMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    SquaredExponential,
    Matern12,
    Matern32,
    Matern52,
}

/// Stationary covariance function `k(x, x') = σ_f² ρ(|x - x'| / ℓ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    family: KernelFamily,
    lengthscale: f64,
    signal_variance: f64,
}

impl Kernel {
    pub fn new(family: KernelFamily, lengthscale: f64, signal_variance: f64) -> Result<Self> {
        if !(lengthscale > 0.0) || !lengthscale.is_finite() {
            return Err(Error::InvalidParameter("lengthscale must be positive"));
        }
        if !(signal_variance > 0.0) || !signal_variance.is_finite() {
            return Err(Error::InvalidParameter("signal variance must be positive"));
        }
        Ok(Self {
            family,
            lengthscale,
            signal_variance,
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_variance
    }

    /// Kernel value without input validation.
    #[inline]
    pub fn eval(&self, x: f64, x2: f64) -> f64 {
        let r = (x - x2).abs() / self.lengthscale;
        let shape = match self.family {
            KernelFamily::SquaredExponential => libm::exp(-0.5 * r * r),
            KernelFamily::Matern12 => libm::exp(-r),
            KernelFamily::Matern32 => {
                let s = libm::sqrt(3.0) * r;
                (1.0 + s) * libm::exp(-s)
            }
            KernelFamily::Matern52 => {
                let s = libm::sqrt(5.0) * r;
                (1.0 + s + s * s / 3.0) * libm::exp(-s)
            }
        };
        self.signal_variance * shape
    }
}

/// `k(x, x')`, rejecting non-finite inputs.
pub fn kernel_eval(k: &Kernel, x: f64, x2: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite {
            what: "kernel input",
            index: 0,
        });
    }
    if !x2.is_finite() {
        return Err(Error::NonFinite {
            what: "kernel input",
            index: 1,
        });
    }
    Ok(k.eval(x, x2))
}

pub(crate) fn check_locations(domain: &Interval, xs: &[f64]) -> Result<()> {
    if let Some(i) = xs.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            what: "location",
            index: i,
        });
    }
    if xs.iter().any(|x| !domain.contains(*x)) {
        return Err(Error::Domain("location outside the domain"));
    }
    Ok(())
}

/// Cross-covariance matrix with entry `(i, j) = k(xs_i, ys_j)`.
pub fn gram_matrix(k: &Kernel, domain: &Interval, xs: &[f64], ys: &[f64]) -> Result<Matrix> {
    check_locations(domain, xs)?;
    check_locations(domain, ys)?;
    Ok(Matrix::from_fn(xs.len(), ys.len(), |i, j| {
        k.eval(xs[i], ys[j])
    }))
}

/// Gram matrix of a single location set.
pub fn gram_sym(k: &Kernel, domain: &Interval, xs: &[f64]) -> Result<SymMatrix> {
    SymMatrix::new(gram_matrix(k, domain, xs, xs)?)
}

/// `(T_k f)(x) ≈ Σ_i w_i k(x, x_i) f(x_i)`.
pub fn integral_operator_apply(
    k: &Kernel,
    f: impl Fn(f64) -> f64,
    rule: &QuadratureRule,
    x: f64,
) -> Result<f64> {
    check_locations(&rule.domain(), &[x])?;
    rule.integrate(|t| k.eval(x, t) * f(t))
}

/// Applies `T_k` to a function known only through its node values.
pub(crate) fn apply_on_nodes(k: &Kernel, rule: &QuadratureRule, values: &[f64], x: f64) -> f64 {
    rule.nodes()
        .iter()
        .zip(rule.weights())
        .zip(values)
        .map(|((t, w), v)| w * k.eval(x, *t) * v)
        .sum()
}

/// Smallest eigenvalue kept, relative to the largest.
pub const EIGENVALUE_FLOOR: f64 = 1e-12;

/// Leading eigenpairs of `T_k`, discretized on a quadrature rule.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    kernel: Kernel,
    rule: QuadratureRule,
    eigenvalues: Vec<f64>,
    /// `p × M`, column `m` holds `e_m` at the nodes.
    node_values: Matrix,
}

impl EigenSystem {
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// `e_m` at the quadrature nodes.
    pub fn node_values(&self, m: usize) -> Vec<f64> {
        self.node_values.column(m)
    }

    /// `e_m(x)` through the Nyström extension `(1/λ_m) Σ_i w_i k(x, x_i) e_m(x_i)`.
    pub fn eval(&self, m: usize, x: f64) -> f64 {
        let col = self.node_values.column(m);
        apply_on_nodes(&self.kernel, &self.rule, &col, x) / self.eigenvalues[m]
    }

    /// `Σ_{m<M} λ_m e_m(x) e_m(x')`.
    pub fn reconstruct_kernel(&self, x: f64, x2: f64) -> f64 {
        (0..self.rank())
            .map(|m| self.eigenvalues[m] * self.eval(m, x) * self.eval(m, x2))
            .sum()
    }

    /// `⟨e_m, f⟩` under the quadrature rule, for `f` given at the nodes.
    pub fn project(&self, m: usize, values: &[f64]) -> f64 {
        self.rule
            .weights()
            .iter()
            .zip(values)
            .enumerate()
            .map(|(i, (w, v))| w * self.node_values[(i, m)] * v)
            .sum()
    }
}

/// Solves the weighted eigenproblem `W^{1/2} K W^{1/2} v = λ v` on the nodes of
/// `rule` and keeps the `count` leading pairs.
///
/// Eigenvalues below `EIGENVALUE_FLOOR · λ_1` end the system early. Each
/// eigenfunction is signed so that its largest-magnitude node value is positive.
pub fn nystrom_eigensystem(k: &Kernel, rule: &QuadratureRule, count: usize) -> Result<EigenSystem> {
    let p = rule.len();
    if count > p {
        return Err(Error::Capacity {
            requested: count,
            available: p,
        });
    }
    if count == 0 {
        return Err(Error::InvalidParameter("eigensystem rank must be at least one"));
    }
    let sqrt_w: Vec<f64> = rule.weights().iter().map(|w| libm::sqrt(*w)).collect();
    let nodes = rule.nodes();
    let a = Matrix::from_fn(p, p, |i, j| sqrt_w[i] * k.eval(nodes[i], nodes[j]) * sqrt_w[j]);
    let (values, vectors) = symmetric_eigen(&SymMatrix::new(a)?);

    let lead = values[0];
    if !(lead > f64::MIN_POSITIVE) || !lead.is_finite() {
        return Err(Error::Rank);
    }
    let rank = values
        .iter()
        .take(count)
        .position(|v| *v < EIGENVALUE_FLOOR * lead)
        .unwrap_or(count);

    let mut node_values = Matrix::zeros(p, rank);
    for m in 0..rank {
        let mut col: Vec<f64> = (0..p).map(|i| vectors[(i, m)] / sqrt_w[i]).collect();
        let pivot = col.iter().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { *v } else { acc });
        if pivot < 0.0 {
            col.iter_mut().for_each(|v| *v = -*v);
        }
        for (i, v) in col.into_iter().enumerate() {
            node_values[(i, m)] = v;
        }
    }
    Ok(EigenSystem {
        kernel: *k,
        rule: rule.clone(),
        eigenvalues: values[..rank].to_vec(),
        node_values,
    })
}
