//! Experiment configuration (TOML).
//!
//! ```toml
//! mode = "variational-closed"
//! dataset = "data.csv"
//! noise_variance = 0.05
//!
//! [domain]
//! lower = 0.0
//! upper = 1.0
//!
//! [kernel]
//! family = "squared-exponential"
//! lengthscale = 0.2
//!
//! [features]
//! family = "dirac"
//! count = 5
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};

use grevf_core::numerics::DEFAULT_NODES;
use grevf_core::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::load_feature_table;
use crate::error::{CliError, Context, Result};

pub const NODES_ENV: &str = "GREVF_DEFAULT_NODES";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Exact,
    VariationalClosed,
    VariationalOpt,
    Nystrom,
    Equivalence,
    ElboTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelName {
    #[serde(alias = "se")]
    SquaredExponential,
    Matern12,
    Matern32,
    Matern52,
}

impl From<KernelName> for KernelFamily {
    fn from(k: KernelName) -> Self {
        match k {
            KernelName::SquaredExponential => KernelFamily::SquaredExponential,
            KernelName::Matern12 => KernelFamily::Matern12,
            KernelName::Matern32 => KernelFamily::Matern32,
            KernelName::Matern52 => KernelFamily::Matern52,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureFamily {
    Dirac,
    Bump,
    Eigen,
    CustomTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: KernelName,
    pub lengthscale: f64,
    #[serde(default = "one")]
    pub signal_variance: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub nodes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    pub family: FeatureFamily,
    pub count: Option<usize>,
    /// Dirac locations or bump centres; evenly spaced cell midpoints when absent.
    pub locations: Option<Vec<f64>>,
    /// Bump half-width.
    pub width: Option<f64>,
    /// One `x,g` table per custom feature.
    pub tables: Option<Vec<PathBuf>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSpec {
    pub step: f64,
    pub iterations: usize,
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        Self {
            step: d.step,
            iterations: d.iterations,
            batch_size: d.batch_size,
            seed: d.seed,
            tolerance: d.tolerance,
        }
    }
}

impl From<&OptimizerSpec> for OptimizerConfig {
    fn from(s: &OptimizerSpec) -> Self {
        OptimizerConfig {
            step: s.step,
            iterations: s.iterations,
            batch_size: s.batch_size,
            seed: s.seed,
            tolerance: s.tolerance,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Evenly spaced points spanning the domain (default 50).
    pub points: Option<usize>,
    /// Explicit locations; overrides `points`.
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub dataset: PathBuf,
    pub noise_variance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictions: Option<PathBuf>,
    pub domain: DomainSpec,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<FeatureSpec>,
    #[serde(default)]
    pub optimizer: OptimizerSpec,
    #[serde(default)]
    pub grid: GridSpec,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::config("<file>", e.message().to_string()))
    }

    /// Reads the file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.dataset);
        cfg.output.as_mut().map(resolve);
        cfg.predictions.as_mut().map(resolve);
        if let Some(tables) = cfg.features.as_mut().and_then(|f| f.tables.as_mut()) {
            tables.iter_mut().for_each(resolve);
        }
        Ok(cfg)
    }

    /// Fills the node count from the environment or the library default.
    pub fn resolve_nodes(&mut self) -> Result<()> {
        if self.quadrature.nodes.is_none() {
            let nodes = match std::env::var(NODES_ENV) {
                Ok(v) => v
                    .trim()
                    .parse()
                    .map_err(|_| CliError::config(NODES_ENV, format!("not a node count: {v:?}")))?,
                Err(_) => DEFAULT_NODES,
            };
            self.quadrature.nodes = Some(nodes);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_variance > 0.0) || !self.noise_variance.is_finite() {
            return Err(CliError::config("noise_variance", "must be positive"));
        }
        if self.mode == Mode::Nystrom {
            match self.lambda {
                Some(l) if l > 0.0 && l.is_finite() => {}
                Some(_) => return Err(CliError::config("lambda", "must be positive")),
                None => return Err(CliError::config("lambda", "required in nystrom mode")),
            }
        }
        if self.mode != Mode::Exact && self.features.is_none() {
            return Err(CliError::config("features", "required in this mode"));
        }
        if self.quadrature.nodes == Some(0) {
            return Err(CliError::config("quadrature.nodes", "must be at least 1"));
        }
        if let Some(f) = &self.features {
            if f.count == Some(0) {
                return Err(CliError::config("features.count", "must be at least 1"));
            }
        }
        if self.grid.points == Some(0) {
            return Err(CliError::config("grid.points", "must be at least 1"));
        }
        Ok(())
    }

    pub fn interval(&self) -> Result<Interval> {
        Interval::new(self.domain.lower, self.domain.upper).at("numerics", "domain")
    }

    pub fn kernel(&self) -> Result<Kernel> {
        let k = &self.kernel;
        Kernel::new(k.family.into(), k.lengthscale, k.signal_variance).at("kernels", "kernel")
    }

    pub fn rule(&self) -> Result<QuadratureRule> {
        let nodes = self.quadrature.nodes.unwrap_or(DEFAULT_NODES);
        gauss_legendre_rule(self.interval()?, nodes).at("numerics", "quadrature.nodes")
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        let domain = self.interval()?;
        let grid = match &self.grid.values {
            Some(v) if v.is_empty() => return Err(CliError::config("grid.values", "empty")),
            Some(v) => v.clone(),
            None => domain.linspace(self.grid.points.unwrap_or(50)),
        };
        let outside: Vec<f64> = grid.iter().copied().filter(|x| !domain.contains(*x)).collect();
        if !outside.is_empty() {
            return Err(CliError::config("grid", format!("points outside domain: {outside:?}")));
        }
        Ok(grid)
    }

    pub fn feature_set(&self, kernel: &Kernel, rule: &QuadratureRule) -> Result<FeatureSet> {
        let spec = self
            .features
            .as_ref()
            .ok_or_else(|| CliError::config("features", "required in this mode"))?;
        let domain = rule.domain();
        let centres = || -> Result<Vec<f64>> {
            match (&spec.locations, spec.count) {
                (Some(l), Some(c)) if l.len() != c => Err(CliError::config(
                    "features.count",
                    format!("{c} does not match {} locations", l.len()),
                )),
                (Some(l), _) if l.is_empty() => Err(CliError::config("features.locations", "empty")),
                (Some(l), _) => Ok(l.clone()),
                (None, Some(c)) => {
                    let h = domain.length() / c as f64;
                    Ok((0..c).map(|i| domain.lower() + (i as f64 + 0.5) * h).collect())
                }
                (None, None) => Err(CliError::config("features.count", "count or locations required")),
            }
        };
        let elements = match spec.family {
            FeatureFamily::Dirac => {
                let z = centres()?;
                let outside: Vec<f64> = z.iter().copied().filter(|x| !domain.contains(*x)).collect();
                if !outside.is_empty() {
                    return Err(CliError::config(
                        "features.locations",
                        format!("outside domain: {outside:?}"),
                    ));
                }
                DualElement::diracs(&z)
            }
            FeatureFamily::Bump => {
                let width = spec
                    .width
                    .ok_or_else(|| CliError::config("features.width", "required for bump features"))?;
                centres()?
                    .into_iter()
                    .map(|c| make_bump_interdomain(&domain, c, width))
                    .collect::<grevf_core::Result<Vec<_>>>()
                    .at("features", "features.width")?
            }
            FeatureFamily::Eigen => {
                let count = spec
                    .count
                    .ok_or_else(|| CliError::config("features.count", "required for eigen features"))?;
                return make_eigen_features(kernel, rule, count).at("kernels", "features.count");
            }
            FeatureFamily::CustomTable => {
                let tables = match &spec.tables {
                    Some(t) if !t.is_empty() => t,
                    _ => return Err(CliError::config("features.tables", "required for custom-table features")),
                };
                if let Some(c) = spec.count {
                    if c != tables.len() {
                        return Err(CliError::config(
                            "features.count",
                            format!("{c} does not match {} tables", tables.len()),
                        ));
                    }
                }
                tables
                    .iter()
                    .map(|p| load_feature_table(p).map(|t| DualElement::InterDomain(t.into_test_function())))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        FeatureSet::new(elements, *kernel, rule.clone()).at("features", "features")
    }
}
