//! Features as continuous linear functionals on the path space.
//!
//! Every feature is one of three kinds of dual element:
//!
//! * `Dirac(z)`: point evaluation `F ↦ F(z)`;
//! * `InterDomain(g)`: `F ↦ ∫ F(x) g(x) dx`;
//! * `RkhsPreimage(f)`: `F ↦ ⟨F, f⟩_{L²}`, whose realized RKHS representer is
//!   `T_k f`. Storing the preimage avoids inverting `T_k`.
//!
//! Covariances between any two elements follow from
//! `Cov(L F, L' F) = ∫∫ k(x, x') dμ(x) dμ'(x')`, where a function element is
//! the signed measure `g(x) dx`. Integrals use the quadrature rule shared by
//! a [`FeatureSet`]. Only the node values of a function element matter.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::kernels::{check_locations, nystrom_eigensystem, EigenSystem, Kernel};
use crate::numerics::{Interval, Matrix, QuadratureRule, SymMatrix};
use crate::{Error, Result};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A real function on the domain, used as an inter-domain test function or
/// an RKHS preimage.
#[derive(Clone)]
pub struct TestFunction {
    f: RealFn,
    unit_mass: bool,
    tabulated: Option<Arc<(QuadratureRule, Vec<f64>)>>,
}

impl TestFunction {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            f: Arc::new(f),
            unit_mass: false,
            tabulated: None,
        }
    }

    /// Rescale node values so the function integrates to one under whatever
    /// rule it is discretized on.
    pub fn with_unit_mass(mut self) -> Self {
        self.unit_mass = true;
        self
    }

    /// Attach exact node values for `rule`; they are used instead of
    /// evaluating the function whenever the same rule is requested.
    pub fn with_node_values(mut self, rule: &QuadratureRule, values: Vec<f64>) -> Result<Self> {
        if values.len() != rule.len() {
            return Err(Error::Shape {
                expected: (rule.len(), 1),
                found: (values.len(), 1),
            });
        }
        self.tabulated = Some(Arc::new((rule.clone(), values)));
        Ok(self)
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    /// Values at the nodes of `rule`, rescaled when the function carries unit mass.
    pub fn node_values(&self, rule: &QuadratureRule) -> Result<Vec<f64>> {
        let mut values = match &self.tabulated {
            Some(t) if t.0 == *rule => t.1.clone(),
            _ => rule.nodes().iter().map(|x| (self.f)(*x)).collect::<Vec<_>>(),
        };
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "test function",
                index,
            });
        }
        if self.unit_mass {
            let mass: f64 = values.iter().zip(rule.weights()).map(|(v, w)| v * w).sum();
            if !(mass.abs() > 0.0) {
                return Err(Error::InvalidParameter(
                    "test function has zero mass on the quadrature nodes",
                ));
            }
            values.iter_mut().for_each(|v| *v /= mass);
        }
        Ok(values)
    }
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("unit_mass", &self.unit_mass)
            .field("tabulated", &self.tabulated.is_some())
            .finish_non_exhaustive()
    }
}

/// One feature `L_m`, or one prediction functional `T`.
#[derive(Debug, Clone)]
pub enum DualElement {
    Dirac(f64),
    InterDomain(TestFunction),
    RkhsPreimage(TestFunction),
}

impl DualElement {
    pub fn dirac(z: f64) -> Self {
        DualElement::Dirac(z)
    }

    pub fn inter_domain(g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        DualElement::InterDomain(TestFunction::new(g))
    }

    pub fn rkhs_preimage(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        DualElement::RkhsPreimage(TestFunction::new(f))
    }

    pub fn diracs(locations: &[f64]) -> Vec<Self> {
        locations.iter().map(|z| DualElement::Dirac(*z)).collect()
    }

    fn prepare(&self, rule: &QuadratureRule) -> Result<Prepared> {
        match self {
            DualElement::Dirac(z) => {
                check_locations(&rule.domain(), &[*z])?;
                Ok(Prepared::Point(*z))
            }
            DualElement::InterDomain(g) | DualElement::RkhsPreimage(g) => {
                let values = g.node_values(rule)?;
                Ok(Prepared::Weighted(
                    values.iter().zip(rule.weights()).map(|(v, w)| v * w).collect(),
                ))
            }
        }
    }
}

/// A dual element reduced to what covariance assembly needs: a location, or
/// quadrature weights times node values.
#[derive(Debug, Clone)]
enum Prepared {
    Point(f64),
    Weighted(Vec<f64>),
}

impl Prepared {
    fn is_point(&self) -> bool {
        matches!(self, Prepared::Point(_))
    }
}

/// Kernel values at the node grid, built once per set when a function element is present.
#[derive(Debug, Clone)]
struct NodeGram(Matrix);

struct Context<'a> {
    kernel: &'a Kernel,
    rule: &'a QuadratureRule,
    node_gram: Option<&'a NodeGram>,
}

impl Context<'_> {
    fn cov(&self, a: &Prepared, b: &Prepared) -> f64 {
        let nodes = self.rule.nodes();
        match (a, b) {
            (Prepared::Point(z), Prepared::Point(z2)) => self.kernel.eval(*z, *z2),
            (Prepared::Point(z), Prepared::Weighted(u))
            | (Prepared::Weighted(u), Prepared::Point(z)) => nodes
                .iter()
                .zip(u)
                .map(|(x, ui)| self.kernel.eval(*z, *x) * ui)
                .sum(),
            (Prepared::Weighted(u), Prepared::Weighted(v)) => {
                let mut acc = 0.0;
                for (i, ui) in u.iter().enumerate() {
                    if *ui == 0.0 {
                        continue;
                    }
                    let inner: f64 = match self.node_gram {
                        Some(g) => g.0.row(i).iter().zip(v).map(|(k, vj)| k * vj).sum(),
                        None => nodes
                            .iter()
                            .zip(v)
                            .map(|(x, vj)| self.kernel.eval(nodes[i], *x) * vj)
                            .sum(),
                    };
                    acc += ui * inner;
                }
                acc
            }
        }
    }

    fn cross(&self, rows: &[Prepared], cols: &[Prepared]) -> Matrix {
        Matrix::from_fn(rows.len(), cols.len(), |i, j| self.cov(&rows[i], &cols[j]))
    }

    fn sym(&self, elems: &[Prepared]) -> Result<SymMatrix> {
        let n = elems.len();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.cov(&elems[i], &elems[j]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix::new(m)
    }
}

fn prepare_all(elems: &[DualElement], rule: &QuadratureRule) -> Result<Vec<Prepared>> {
    elems.iter().map(|e| e.prepare(rule)).collect()
}

/// `Cov(a F, b F)` for two dual elements.
///
/// Cases: Dirac/Dirac is `k(z, z')`; Dirac/function is `(T_k g)(z)`;
/// function/function is the double integral `∫∫ k(x, x') g(x) g'(x') dx dx'`
/// on the tensor grid of `rule`. Preimage elements behave as inter-domain
/// elements with `g = f`.
pub fn feature_cov(
    a: &DualElement,
    b: &DualElement,
    kernel: &Kernel,
    rule: &QuadratureRule,
) -> Result<f64> {
    let ctx = Context {
        kernel,
        rule,
        node_gram: None,
    };
    Ok(ctx.cov(&a.prepare(rule)?, &b.prepare(rule)?))
}

/// Covariance matrix between two lists of dual elements (rows `a`, columns `b`).
pub fn cross_covariance(
    a: &[DualElement],
    b: &[DualElement],
    kernel: &Kernel,
    rule: &QuadratureRule,
) -> Result<Matrix> {
    let pa = prepare_all(a, rule)?;
    let pb = prepare_all(b, rule)?;
    let gram = node_gram_if_needed(kernel, rule, pa.iter().chain(&pb));
    let ctx = Context {
        kernel,
        rule,
        node_gram: gram.as_ref(),
    };
    Ok(ctx.cross(&pa, &pb))
}

/// Joint covariance matrix of a list of dual elements.
pub fn covariance(
    elems: &[DualElement],
    kernel: &Kernel,
    rule: &QuadratureRule,
) -> Result<SymMatrix> {
    let p = prepare_all(elems, rule)?;
    let gram = node_gram_if_needed(kernel, rule, p.iter());
    Context {
        kernel,
        rule,
        node_gram: gram.as_ref(),
    }
    .sym(&p)
}

fn node_gram_if_needed<'a>(
    kernel: &Kernel,
    rule: &QuadratureRule,
    mut elems: impl Iterator<Item = &'a Prepared>,
) -> Option<NodeGram> {
    let weighted = elems.by_ref().filter(|e| !e.is_point()).count();
    if weighted < 2 {
        return None;
    }
    let nodes = rule.nodes();
    Some(NodeGram(Matrix::from_fn(nodes.len(), nodes.len(), |i, j| {
        kernel.eval(nodes[i], nodes[j])
    })))
}

/// Ordered features `L = (L_1, …, L_M)` sharing a kernel and a quadrature rule.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    elements: Vec<DualElement>,
    prepared: Vec<Prepared>,
    kernel: Kernel,
    rule: QuadratureRule,
    node_gram: Option<NodeGram>,
}

impl FeatureSet {
    pub fn new(elements: Vec<DualElement>, kernel: Kernel, rule: QuadratureRule) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidParameter("a feature set needs at least one element"));
        }
        let prepared = prepare_all(&elements, &rule)?;
        let node_gram = node_gram_if_needed(&kernel, &rule, prepared.iter());
        Ok(Self {
            elements,
            prepared,
            kernel,
            rule,
            node_gram,
        })
    }

    /// Inducing points at `locations`.
    pub fn diracs(locations: &[f64], kernel: Kernel, rule: QuadratureRule) -> Result<Self> {
        Self::new(DualElement::diracs(locations), kernel, rule)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[DualElement] {
        &self.elements
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn domain(&self) -> Interval {
        self.rule.domain()
    }

    fn ctx(&self) -> Context<'_> {
        Context {
            kernel: &self.kernel,
            rule: &self.rule,
            node_gram: self.node_gram.as_ref(),
        }
    }

    /// `C_LL`.
    pub fn gram(&self) -> Result<SymMatrix> {
        self.ctx().sym(&self.prepared)
    }

    /// `C_LD`, shape `M × N`, for point observations at `xs`.
    pub fn data_cross(&self, xs: &[f64]) -> Result<Matrix> {
        check_locations(&self.domain(), xs)?;
        let ctx = self.ctx();
        Ok(Matrix::from_fn(self.len(), xs.len(), |m, n| {
            ctx.cov(&self.prepared[m], &Prepared::Point(xs[n]))
        }))
    }

    /// Row of `C_TL` for `T = δ_x`, i.e. `(Cov(F(x), L_m F))_m`.
    pub fn point_cov(&self, x: f64) -> Result<Vec<f64>> {
        Ok(self.data_cross(&[x])?.column(0))
    }

    /// `C_TL`, shape `|T| × M`.
    pub fn target_cross(&self, targets: &[DualElement]) -> Result<Matrix> {
        let pt = prepare_all(targets, &self.rule)?;
        let needs_grid = pt.iter().any(|t| !t.is_point()) && self.node_gram.is_none();
        let gram = if needs_grid {
            node_gram_if_needed(
                &self.kernel,
                &self.rule,
                pt.iter().chain(&self.prepared).filter(|e| !e.is_point()),
            )
        } else {
            None
        };
        let ctx = Context {
            kernel: &self.kernel,
            rule: &self.rule,
            node_gram: gram.as_ref().or(self.node_gram.as_ref()),
        };
        Ok(ctx.cross(&pt, &self.prepared))
    }

    /// `C_TT'` for targets, using this set's kernel and rule.
    pub fn target_cov(&self, targets: &[DualElement]) -> Result<SymMatrix> {
        covariance(targets, &self.kernel, &self.rule)
    }

    /// A set with one more feature appended.
    pub fn with_element(&self, element: DualElement) -> Result<Self> {
        let mut elements = self.elements.clone();
        elements.push(element);
        Self::new(elements, self.kernel, self.rule.clone())
    }
}

/// `C_LL` of a feature set.
pub fn feature_gram(fs: &FeatureSet) -> Result<SymMatrix> {
    fs.gram()
}

/// `C_LD` of a feature set against point observations.
pub fn feature_data_cross(fs: &FeatureSet, xs: &[f64]) -> Result<Matrix> {
    fs.data_cross(xs)
}

/// Covariances between `δ_x` and each feature.
pub fn feature_point_cov(fs: &FeatureSet, x: f64) -> Result<Vec<f64>> {
    fs.point_cov(x)
}

/// Builds Fourier/RKHS features from the leading Mercer eigenpairs: preimages
/// `f_m = e_m / λ_m`, so the realized RKHS feature is `T_k f_m = e_m` and
/// `C_LL = diag(1/λ_m)`.
pub fn make_eigen_features(kernel: &Kernel, rule: &QuadratureRule, count: usize) -> Result<FeatureSet> {
    let es = nystrom_eigensystem(kernel, rule, count)?;
    eigen_features_from(&Arc::new(es), count)
}

/// Eigen features drawn from an existing eigensystem.
pub fn eigen_features_from(es: &Arc<EigenSystem>, count: usize) -> Result<FeatureSet> {
    if count == 0 || count > es.rank() {
        return Err(Error::Rank);
    }
    let rule = es.rule().clone();
    let mut elements = Vec::with_capacity(count);
    for m in 0..count {
        let lambda = es.eigenvalues()[m];
        let values: Vec<f64> = es.node_values(m).iter().map(|v| v / lambda).collect();
        let sys = Arc::clone(es);
        let f = TestFunction::new(move |x| sys.eval(m, x) / lambda).with_node_values(&rule, values)?;
        elements.push(DualElement::RkhsPreimage(f));
    }
    FeatureSet::new(elements, *es.kernel(), rule)
}

/// Inter-domain feature whose test function is a triangular bump of unit
/// integral centred at `center` with half-width `width`.
///
/// The bump is normalized on the quadrature nodes, so it has unit mass under
/// the rule it is used with.
pub fn make_bump_interdomain(domain: &Interval, center: f64, width: f64) -> Result<DualElement> {
    if !(width > 0.0) || !width.is_finite() || !center.is_finite() {
        return Err(Error::InvalidParameter("bump width must be positive"));
    }
    if !domain.contains(center - width) || !domain.contains(center + width) {
        return Err(Error::Domain("bump support outside the domain"));
    }
    let g = move |x: f64| {
        let t = 1.0 - (x - center).abs() / width;
        if t > 0.0 {
            t / width
        } else {
            0.0
        }
    };
    Ok(DualElement::InterDomain(TestFunction::new(g).with_unit_mass()))
}

/// `Σ_j λ_j L_a(e_j) L_b(e_j)`: the covariance of two elements through the
/// Mercer expansion, independent of the double-quadrature route.
pub fn eigen_expansion_cov(es: &EigenSystem, a: &DualElement, b: &DualElement) -> Result<f64> {
    let pa = apply_to_eigenfunctions(es, a)?;
    let pb = apply_to_eigenfunctions(es, b)?;
    Ok(es
        .eigenvalues()
        .iter()
        .zip(pa.iter().zip(&pb))
        .map(|(l, (x, y))| l * x * y)
        .sum())
}

fn apply_to_eigenfunctions(es: &EigenSystem, e: &DualElement) -> Result<Vec<f64>> {
    match e {
        DualElement::Dirac(z) => {
            check_locations(&es.rule().domain(), &[*z])?;
            Ok((0..es.rank()).map(|m| es.eval(m, *z)).collect())
        }
        DualElement::InterDomain(g) | DualElement::RkhsPreimage(g) => {
            let values = g.node_values(es.rule())?;
            Ok((0..es.rank()).map(|m| es.project(m, &values)).collect())
        }
    }
}
