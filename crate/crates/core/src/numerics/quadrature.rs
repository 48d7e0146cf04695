use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::{Error, Result};

/// Node count used when no other value is configured.
pub const DEFAULT_NODES: usize = 128;

/// Closed interval `[lower, upper]` with `lower < upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lower: f64,
    upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !lower.is_finite() || !upper.is_finite() {
            return Err(Error::Domain("interval endpoints must be finite"));
        }
        if lower >= upper {
            return Err(Error::Domain("interval requires lower < upper"));
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    /// `n` evenly spaced points including both endpoints (the midpoint when `n == 1`).
    pub fn linspace(&self, n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => alloc::vec![0.5 * (self.lower + self.upper)],
            _ => {
                let step = self.length() / (n - 1) as f64;
                let mut v: Vec<f64> = (0..n).map(|i| self.lower + step * i as f64).collect();
                v[n - 1] = self.upper;
                v
            }
        }
    }
}

/// Gauss–Legendre nodes and weights on an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    domain: Interval,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_i f(x_i)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        integrate(f, self)
    }
}

/// Builds the `p`-point Gauss–Legendre rule on `domain`.
///
/// Nodes are the roots of the Legendre polynomial `P_p`, found by Newton
/// iteration from the Tricomi initial guess, then mapped affinely from
/// `[-1, 1]`.
pub fn gauss_legendre_rule(domain: Interval, p: usize) -> Result<QuadratureRule> {
    if p == 0 {
        return Err(Error::InvalidParameter("quadrature needs at least one node"));
    }
    let half = domain.length() / 2.0;
    let mid = (domain.lower() + domain.upper()) / 2.0;
    let mut ref_nodes = alloc::vec![0.0; p];
    let mut ref_weights = alloc::vec![0.0; p];
    for i in 0..p.div_ceil(2) {
        let mut x = libm::cos(PI * (i as f64 + 0.75) / (p as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (pn, dpn) = legendre(p, x);
            dp = dpn;
            let dx = pn / dpn;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dpn) = legendre(p, x);
        if dpn != 0.0 {
            dp = dpn;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x is the i-th largest root; fill symmetric pairs
        ref_nodes[p - 1 - i] = x;
        ref_nodes[i] = -x;
        ref_weights[p - 1 - i] = w;
        ref_weights[i] = w;
    }
    if p % 2 == 1 {
        ref_nodes[p / 2] = 0.0;
    }
    let nodes = ref_nodes.iter().map(|t| mid + half * t).collect();
    let weights = ref_weights.iter().map(|w| half * w).collect();
    Ok(QuadratureRule {
        domain,
        nodes,
        weights,
    })
}

/// Value and derivative of `P_n(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// `Σ w_i f(x_i)`; fails on the first node where `f` is not finite.
pub fn integrate(f: impl Fn(f64) -> f64, rule: &QuadratureRule) -> Result<f64> {
    let mut acc = 0.0;
    for (index, (&x, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "integrand",
                index,
            });
        }
        acc += w * v;
    }
    Ok(acc)
}
