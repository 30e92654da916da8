//! CSV and JSON persistence.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a file back reproduces every value bit for bit.

use std::fs;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussmath::Vector;
use crate::model::ObservationRecord;
use crate::record::RunRecord;

use super::config::{ModelConfig, SCHEMA_VERSION};

pub const RESULTS_HEADER: [&str; 9] = [
    "t",
    "param_index",
    "mean",
    "std",
    "bias",
    "ess",
    "refined",
    "resampled",
    "model_evals",
];

/// Provenance written next to an observation file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationSidecar {
    pub schema_version: u32,
    pub model: String,
    pub truth: Vec<f64>,
    pub data_seed: u64,
    pub config: ModelConfig,
}

impl ObservationSidecar {
    pub fn new(config: &ModelConfig, data_seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            model: config.name().to_string(),
            truth: config.truth().iter().copied().collect(),
            data_seed,
            config: config.clone(),
        }
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// `t,y1,…,y_ny`.
pub fn write_observations(path: &Path, data: &[ObservationRecord]) -> Result<()> {
    ensure_parent(path)?;
    let n_y = data.first().map_or(0, |r| r.y.len());
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=n_y).map(|i| format!("y{i}")));
    w.write_record(&header)?;
    for rec in data {
        let mut row = vec![rec.t.to_string()];
        row.extend(rec.y.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_observations(path: &Path) -> Result<Vec<ObservationRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let n_y = header.len().saturating_sub(1);
    if header.get(0) != Some("t") || (1..=n_y).any(|i| header.get(i) != Some(format!("y{i}").as_str())) || n_y == 0 {
        return Err(Error::Dimension(format!(
            "{}: expected header t,y1,...,y_ny",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row?;
        let bad = |what: &str| Error::Dimension(format!("{}: row {}: {what}", path.display(), line + 2));
        let t: usize = row.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| bad("invalid step index"))?;
        let y = (1..=n_y)
            .map(|i| row.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| bad("invalid value")))
            .collect::<Result<Vec<f64>>>()?;
        out.push(ObservationRecord {
            t,
            y: Vector::from_vec(y),
        });
    }
    Ok(out)
}

/// One row per step and parameter coordinate.
pub fn write_results(path: &Path, records: &[RunRecord]) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULTS_HEADER)?;
    for r in records {
        for j in 0..r.mean.len() {
            w.write_record([
                r.t.to_string(),
                j.to_string(),
                r.mean[j].to_string(),
                r.std[j].to_string(),
                r.bias[j].to_string(),
                r.ess.to_string(),
                r.refined.to_string(),
                r.resampled.to_string(),
                r.model_evals.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct ResultRow {
    t: usize,
    param_index: usize,
    mean: f64,
    std: f64,
    bias: f64,
    ess: f64,
    refined: bool,
    resampled: bool,
    model_evals: u64,
}

/// Inverse of [`write_results`]; `t0` and `wall_time` are not stored.
pub fn read_results(path: &Path) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out: Vec<RunRecord> = Vec::new();
    for row in r.deserialize() {
        let row: ResultRow = row?;
        let fresh = out.last().is_none_or(|last| last.t != row.t);
        if fresh {
            if row.param_index != 0 {
                return Err(Error::Dimension(format!("{}: step {} starts at parameter {}", path.display(), row.t, row.param_index)));
            }
            out.push(RunRecord {
                t: row.t,
                mean: Vec::new(),
                std: Vec::new(),
                bias: Vec::new(),
                ess: row.ess,
                refined: row.refined,
                resampled: row.resampled,
                model_evals: row.model_evals,
                t0: 0,
                wall_time: 0.0,
            });
        }
        let rec = out.last_mut().expect("pushed above");
        if row.param_index != rec.mean.len() {
            return Err(Error::Dimension(format!("{}: step {} parameters out of order", path.display(), row.t)));
        }
        rec.mean.push(row.mean);
        rec.std.push(row.std);
        rec.bias.push(row.bias);
    }
    Ok(out)
}
