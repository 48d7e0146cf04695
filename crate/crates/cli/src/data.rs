//! CSV input and output.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use grevf_core::features::TestFunction;
use grevf_core::prelude::*;

use crate::error::{CliError, Result};
use crate::report::PredictionRow;

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    CliError::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

/// Reads two named numeric columns; `fallback` is tried when `second` is absent.
fn read_columns(path: &Path, first: &str, second: &str, fallback: Option<&str>) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = open(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let missing = |name: &str| CliError::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: format!("missing column `{name}`"),
    };
    let i = find(first).ok_or_else(|| missing(first))?;
    let j = find(second)
        .or_else(|| fallback.and_then(find))
        .ok_or_else(|| missing(second))?;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let parse = |k: usize| -> Result<f64> {
            let field = record.get(k).unwrap_or("");
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(CliError::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("not a finite number: {field:?}"),
                }),
            }
        };
        a.push(parse(i)?);
        b.push(parse(j)?);
    }
    Ok((a, b))
}

/// Loads an `x,y` CSV. A predictions file (`x,mean,...`) is accepted too,
/// with `mean` read as the target.
pub fn load_dataset(path: &Path, domain: &Interval, noise_variance: f64) -> Result<Dataset> {
    let (x, y) = read_columns(path, "x", "y", Some("mean"))?;
    if x.is_empty() {
        return Err(CliError::NoObservations {
            path: path.to_path_buf(),
        });
    }
    let outside: Vec<f64> = x.iter().copied().filter(|v| !domain.contains(*v)).collect();
    if !outside.is_empty() {
        return Err(CliError::OutOfDomain {
            path: path.to_path_buf(),
            values: outside,
        });
    }
    Dataset::new(*domain, x, y, noise_variance).map_err(|source| CliError::Module {
        module: "exact",
        field: "dataset",
        source,
    })
}

/// A tabulated test function `g`, linearly interpolated and held constant
/// beyond the end points.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub x: Vec<f64>,
    pub g: Vec<f64>,
}

impl FeatureTable {
    pub fn eval(&self, t: f64) -> f64 {
        let (x, g) = (&self.x, &self.g);
        if t <= x[0] {
            return g[0];
        }
        if t >= x[x.len() - 1] {
            return g[g.len() - 1];
        }
        let k = x.partition_point(|v| *v <= t);
        let w = (t - x[k - 1]) / (x[k] - x[k - 1]);
        g[k - 1] + w * (g[k] - g[k - 1])
    }

    pub fn into_test_function(self) -> TestFunction {
        TestFunction::new(move |t| self.eval(t))
    }
}

pub fn load_feature_table(path: &Path) -> Result<FeatureTable> {
    let (x, g) = read_columns(path, "x", "g", None)?;
    if x.len() < 2 {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "feature table needs at least two rows".into(),
        });
    }
    if let Some(k) = x.windows(2).position(|w| w[1] <= w[0]) {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: k as u64 + 3,
            message: "x must be strictly increasing".into(),
        });
    }
    Ok(FeatureTable { x, g })
}

/// Writes `x,mean,variance[,method]`; the method column appears when rows
/// come from more than one method. Missing variances are left empty.
pub fn write_predictions(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    let with_method = rows.iter().any(|r| r.method != rows[0].method);
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let mut header = vec!["x", "mean", "variance"];
        if with_method {
            header.push("method");
        }
        w.write_record(&header).map_err(|e| csv_error(path, e))?;
        for r in rows {
            let mut rec = vec![
                r.x.to_string(),
                r.mean.to_string(),
                r.variance.map_or(String::new(), |v| v.to_string()),
            ];
            if with_method {
                rec.push(r.method.clone());
            }
            w.write_record(&rec).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(io)?;
    }
    write_atomic(path, &buf)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
