//! Per-step diagnostics emitted by every driver.

use serde::{Deserialize, Serialize};

use crate::gaussmath::Vector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub t: usize,
    /// Weighted parameter mean.
    pub mean: Vec<f64>,
    /// Weighted per-coordinate standard deviation.
    pub std: Vec<f64>,
    /// `mean − truth`.
    pub bias: Vec<f64>,
    pub ess: f64,
    /// Weights at this step are exact (always true for EnKF-SMCS, never for EnKF).
    pub refined: bool,
    pub resampled: bool,
    /// Cumulative number of forward-model calls.
    pub model_evals: u64,
    /// Last step at which exact weights were available.
    #[serde(default)]
    pub t0: usize,
    /// Seconds since the run started; not persisted to results files.
    #[serde(skip)]
    pub wall_time: f64,
}

/// Weighted mean and (biased) standard deviation of `points`.
pub(crate) fn weighted_summary(points: &[Vector], weights: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = points.first().map_or(0, |p| p.len());
    let mut mean = vec![0.0; d];
    for (p, &w) in points.iter().zip(weights) {
        if w > 0.0 {
            for j in 0..d {
                mean[j] += w * p[j];
            }
        }
    }
    let mut var = vec![0.0; d];
    for (p, &w) in points.iter().zip(weights) {
        if w > 0.0 {
            for j in 0..d {
                var[j] += w * (p[j] - mean[j]).powi(2);
            }
        }
    }
    (mean, var.into_iter().map(f64::sqrt).collect())
}

pub(crate) fn bias(mean: &[f64], truth: &Vector) -> Vec<f64> {
    mean.iter().zip(truth.iter()).map(|(m, t)| m - t).collect()
}
