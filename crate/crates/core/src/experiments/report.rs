//! Run summaries and multi-seed comparison reports.
//!
//! Everything here is a pure function of run records, so a report rebuilt
//! from results files equals the one produced right after the runs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::RunRecord;
use crate::smcs::Algorithm;

use super::config::SCHEMA_VERSION;

/// Final-step digest of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub steps: usize,
    pub final_mean: Vec<f64>,
    pub final_std: Vec<f64>,
    pub final_bias: Vec<f64>,
    pub final_abs_bias: Vec<f64>,
    pub total_model_evals: u64,
    /// Steps at which exact weights were computed (empty for EnKF, every step for EnKF-SMCS).
    pub refinement_steps: Vec<usize>,
    pub resample_steps: Vec<usize>,
}

impl RunSummary {
    pub fn from_records(algorithm: Algorithm, seed: u64, records: &[RunRecord]) -> Result<Self> {
        let last = records
            .last()
            .ok_or_else(|| Error::Dimension("cannot summarize an empty run".into()))?;
        Ok(Self {
            algorithm,
            seed,
            steps: last.t,
            final_mean: last.mean.clone(),
            final_std: last.std.clone(),
            final_bias: last.bias.clone(),
            final_abs_bias: last.bias.iter().map(|b| b.abs()).collect(),
            total_model_evals: last.model_evals,
            refinement_steps: records.iter().filter(|r| r.refined).map(|r| r.t).collect(),
            resample_steps: records.iter().filter(|r| r.resampled).map(|r| r.t).collect(),
        })
    }
}

/// Document written by `infer`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferSummary {
    pub schema_version: u32,
    pub experiment: String,
    pub model: String,
    pub particles: usize,
    pub run: RunSummary,
}

/// One finished run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunTable {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub records: Vec<RunRecord>,
}

/// Seed averages for one algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmAggregate {
    pub algorithm: Algorithm,
    pub seeds: usize,
    pub final_mean_abs_bias: Vec<f64>,
    pub final_mean_std: Vec<f64>,
    pub mean_refinements: f64,
    pub mean_model_evals: f64,
}

/// Parameters where an algorithm's seed-averaged final |bias| is at most EnKF's.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WinCount {
    pub algorithm: Algorithm,
    pub wins: usize,
    pub parameters: usize,
    pub won: Vec<bool>,
}

/// Document written by `compare`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub schema_version: u32,
    pub experiment: String,
    pub model: String,
    pub particles: usize,
    pub seeds: Vec<u64>,
    pub aggregates: Vec<AlgorithmAggregate>,
    pub wins_vs_enkf: Vec<WinCount>,
    pub runs: Vec<RunSummary>,
}

impl CompareReport {
    pub fn aggregate(&self, algorithm: Algorithm) -> Option<&AlgorithmAggregate> {
        self.aggregates.iter().find(|a| a.algorithm == algorithm)
    }

    pub fn wins(&self, algorithm: Algorithm) -> Option<&WinCount> {
        self.wins_vs_enkf.iter().find(|w| w.algorithm == algorithm)
    }
}

/// A row of the per-step comparison table.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasRow {
    pub t: usize,
    pub algorithm: Algorithm,
    pub param_index: usize,
    pub mean_abs_bias: f64,
}

fn algorithms_in_order(tables: &[RunTable]) -> Vec<Algorithm> {
    let mut algs: Vec<Algorithm> = Vec::new();
    for t in tables {
        if !algs.contains(&t.algorithm) {
            algs.push(t.algorithm);
        }
    }
    algs
}

fn mean_of(vectors: &[&[f64]]) -> Vec<f64> {
    let d = vectors.first().map_or(0, |v| v.len());
    let n = vectors.len() as f64;
    (0..d).map(|j| vectors.iter().map(|v| v[j]).sum::<f64>() / n).collect()
}

pub fn build_report(experiment: &str, model: &str, particles: usize, tables: &[RunTable]) -> Result<CompareReport> {
    let runs = tables
        .iter()
        .map(|t| RunSummary::from_records(t.algorithm, t.seed, &t.records))
        .collect::<Result<Vec<_>>>()?;
    let mut seeds: Vec<u64> = Vec::new();
    for t in tables {
        if !seeds.contains(&t.seed) {
            seeds.push(t.seed);
        }
    }
    let aggregates: Vec<AlgorithmAggregate> = algorithms_in_order(tables)
        .into_iter()
        .map(|alg| {
            let mine: Vec<&RunSummary> = runs.iter().filter(|r| r.algorithm == alg).collect();
            let n = mine.len() as f64;
            AlgorithmAggregate {
                algorithm: alg,
                seeds: mine.len(),
                final_mean_abs_bias: mean_of(&mine.iter().map(|r| r.final_abs_bias.as_slice()).collect::<Vec<_>>()),
                final_mean_std: mean_of(&mine.iter().map(|r| r.final_std.as_slice()).collect::<Vec<_>>()),
                mean_refinements: mine.iter().map(|r| r.refinement_steps.len() as f64).sum::<f64>() / n,
                mean_model_evals: mine.iter().map(|r| r.total_model_evals as f64).sum::<f64>() / n,
            }
        })
        .collect();
    let wins_vs_enkf = match aggregates.iter().find(|a| a.algorithm == Algorithm::EnkfOnly) {
        None => Vec::new(),
        Some(base) => aggregates
            .iter()
            .filter(|a| a.algorithm != Algorithm::EnkfOnly)
            .map(|a| {
                let won: Vec<bool> = a
                    .final_mean_abs_bias
                    .iter()
                    .zip(&base.final_mean_abs_bias)
                    .map(|(x, b)| x <= b)
                    .collect();
                WinCount {
                    algorithm: a.algorithm,
                    wins: won.iter().filter(|w| **w).count(),
                    parameters: won.len(),
                    won,
                }
            })
            .collect(),
    };
    Ok(CompareReport {
        schema_version: SCHEMA_VERSION,
        experiment: experiment.to_string(),
        model: model.to_string(),
        particles,
        seeds,
        aggregates,
        wins_vs_enkf,
        runs,
    })
}

/// Seed-averaged `|bias|` per step, algorithm and parameter.
pub fn bias_table(tables: &[RunTable]) -> Vec<BiasRow> {
    let mut rows = Vec::new();
    for alg in algorithms_in_order(tables) {
        let mine: Vec<&RunTable> = tables.iter().filter(|t| t.algorithm == alg).collect();
        let steps = mine.iter().map(|t| t.records.len()).min().unwrap_or(0);
        for s in 0..steps {
            let rec0 = &mine[0].records[s];
            for j in 0..rec0.bias.len() {
                let total: f64 = mine.iter().map(|t| t.records[s].bias[j].abs()).sum();
                rows.push(BiasRow {
                    t: rec0.t,
                    algorithm: alg,
                    param_index: j,
                    mean_abs_bias: total / mine.len() as f64,
                });
            }
        }
    }
    rows
}

pub fn write_bias_table(path: &Path, rows: &[BiasRow]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "algorithm", "param_index", "mean_abs_bias"])?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.algorithm.to_string(),
            r.param_index.to_string(),
            r.mean_abs_bias.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(algorithm: Algorithm, seed: u64, bias: f64) -> RunTable {
        RunTable {
            algorithm,
            seed,
            records: (1..=2)
                .map(|t| RunRecord {
                    t,
                    mean: vec![bias, 1.0],
                    std: vec![0.5, 0.25],
                    bias: vec![bias * t as f64, -bias],
                    ess: 10.0,
                    refined: algorithm != Algorithm::EnkfOnly && t == 2,
                    resampled: false,
                    model_evals: 10 * t as u64,
                    t0: 0,
                    wall_time: 0.0,
                })
                .collect(),
        }
    }

    #[test]
    fn aggregates_and_wins() {
        let tables = vec![
            table(Algorithm::EnkfOnly, 1, 1.0),
            table(Algorithm::EnkfOnly, 2, -3.0),
            table(Algorithm::EnkfSmcs, 1, 0.5),
            table(Algorithm::EnkfSmcs, 2, 2.5),
        ];
        let r = build_report("e", "m", 10, &tables).unwrap();
        let enkf = r.aggregate(Algorithm::EnkfOnly).unwrap();
        assert_eq!(enkf.final_mean_abs_bias, vec![4.0, 2.0]);
        let smcs = r.aggregate(Algorithm::EnkfSmcs).unwrap();
        assert_eq!(smcs.final_mean_abs_bias, vec![3.0, 1.5]);
        assert_eq!(smcs.mean_refinements, 1.0);
        let w = r.wins(Algorithm::EnkfSmcs).unwrap();
        assert_eq!((w.wins, w.parameters), (2, 2));
        assert_eq!(r.seeds, vec![1, 2]);
        let rows = bias_table(&tables);
        assert_eq!(rows.len(), 2 * 2 * 2);
        assert_eq!(rows[0].mean_abs_bias, 2.0);
    }

    #[test]
    fn single_run_report_matches_summary() {
        let t = table(Algorithm::EnkfSmcsWr, 4, 0.2);
        let summary = RunSummary::from_records(t.algorithm, t.seed, &t.records).unwrap();
        let r = build_report("e", "m", 10, &[t]).unwrap();
        assert_eq!(r.runs, vec![summary.clone()]);
        let agg = r.aggregate(Algorithm::EnkfSmcsWr).unwrap();
        assert_eq!(agg.final_mean_abs_bias, summary.final_abs_bias);
        assert_eq!(agg.mean_model_evals, summary.total_model_evals as f64);
        assert!(r.wins_vs_enkf.is_empty());
    }
}
