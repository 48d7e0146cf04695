use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::data::write_atomic;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRow {
    pub x: f64,
    pub mean: f64,
    /// Absent for point estimates (Nystrom KRR).
    pub variance: Option<f64>,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub elbo: f64,
}

/// Everything a run produces. Wall-clock timings live apart from the
/// numeric results so that reruns compare equal field by field.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub results: BTreeMap<String, f64>,
    pub summary: BTreeMap<String, String>,
    pub timings: BTreeMap<String, f64>,
    pub predictions: Vec<PredictionRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TracePoint>,
}

impl Report {
    pub fn new(config: ExperimentConfig) -> Self {
        Self {
            config,
            results: BTreeMap::new(),
            summary: BTreeMap::new(),
            timings: BTreeMap::new(),
            predictions: Vec::new(),
            trace: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: f64) {
        self.results.insert(key.to_string(), value);
        self.summary.insert(key.to_string(), significant(value, 6));
    }

    pub fn push_points(&mut self, method: &str, xs: &[f64], mean: &[f64], var: Option<&[f64]>) {
        for (i, (&x, &m)) in xs.iter().zip(mean).enumerate() {
            self.predictions.push(PredictionRow {
                x,
                mean: m,
                variance: var.map(|v| v[i]),
                method: method.to_string(),
            });
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        if let Some((k, _)) = self.results.iter().find(|(_, v)| !v.is_finite()) {
            return Err(CliError::NonFinite(k.clone()));
        }
        for (i, r) in self.predictions.iter().enumerate() {
            if !r.mean.is_finite() || r.variance.is_some_and(|v| !v.is_finite()) {
                return Err(CliError::NonFinite(format!("predictions[{i}]")));
            }
        }
        if let Some(t) = self.trace.iter().find(|t| !t.elbo.is_finite()) {
            return Err(CliError::NonFinite(format!("trace[{}]", t.iteration)));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values serialize")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.check_finite()?;
        let mut text = self.to_json();
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}

/// `v` rounded to `digits` significant digits.
pub fn significant(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    if (-4..15).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        format!("{v:.*e}", digits - 1)
    }
}
