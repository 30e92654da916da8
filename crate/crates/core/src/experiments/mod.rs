//! Configuration, persistence and the three workflows behind the CLI:
//! `simulate` (synthetic data), `infer` (one algorithm, one seed) and
//! `compare` (several algorithms over a seed sweep on one data set).

use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::model::{simulate_observations, validate_observations, ObservationRecord};
use crate::parallel::Execution;
use crate::record::RunRecord;
use crate::smcs::{self, Algorithm};

pub mod config;
pub mod io;
pub mod presets;
pub mod report;

pub use config::{ExperimentConfig, ModelConfig, PriorConfig, SamplerConfig, SCHEMA_VERSION};
pub use report::{build_report, CompareReport, InferSummary, RunSummary, RunTable};

pub const OBSERVATIONS_FILE: &str = "observations.csv";
pub const SIDECAR_FILE: &str = "observations.json";
pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const REPORT_FILE: &str = "report.json";
pub const COMPARE_FILE: &str = "compare.csv";
pub const RUNS_DIR: &str = "runs";

/// Synthetic observations at the configured truth and data seed.
pub fn simulate(config: &ExperimentConfig) -> Result<Vec<ObservationRecord>> {
    let model = config.build_model()?;
    simulate_observations(model.as_ref(), &config.truth(), config.data_seed)
}

/// Writes `observations.csv` and its provenance sidecar into `out`.
pub fn write_simulation(out: &Path, config: &ExperimentConfig, data: &[ObservationRecord]) -> Result<PathBuf> {
    let path = out.join(OBSERVATIONS_FILE);
    io::write_observations(&path, data)?;
    io::write_json(&out.join(SIDECAR_FILE), &io::ObservationSidecar::new(&config.model, config.data_seed))?;
    Ok(path)
}

/// One run of `algorithm` with sampler seed `seed`.
pub fn run_one(
    config: &ExperimentConfig,
    data: &[ObservationRecord],
    algorithm: Algorithm,
    seed: u64,
    exec: Execution,
) -> Result<Vec<RunRecord>> {
    let model = config.build_model()?;
    validate_observations(model.as_ref(), data)?;
    let mut smcs_config = config.sampler.smcs(algorithm, seed);
    smcs_config.exec = exec;
    smcs::run(model.as_ref(), data, &config.truth(), &smcs_config)
}

pub fn infer(
    config: &ExperimentConfig,
    data: &[ObservationRecord],
    algorithm: Algorithm,
    seed: u64,
    exec: Execution,
) -> Result<(Vec<RunRecord>, InferSummary)> {
    let records = run_one(config, data, algorithm, seed, exec)?;
    let summary = InferSummary {
        schema_version: SCHEMA_VERSION,
        experiment: config.name.clone(),
        model: config.model.name().to_string(),
        particles: config.sampler.particles,
        run: RunSummary::from_records(algorithm, seed, &records)?,
    };
    Ok((records, summary))
}

pub fn write_infer(out: &Path, records: &[RunRecord], summary: &InferSummary) -> Result<()> {
    io::write_results(&out.join(RESULTS_FILE), records)?;
    io::write_json(&out.join(SUMMARY_FILE), summary)
}

/// Every configured algorithm over every seed, on the same data.
pub fn compare(config: &ExperimentConfig, data: &[ObservationRecord], exec: Execution) -> Result<(Vec<RunTable>, CompareReport)> {
    let mut tables = Vec::with_capacity(config.seeds.len() * config.algorithms.len());
    for &seed in &config.seeds {
        for &algorithm in &config.algorithms {
            let records = run_one(config, data, algorithm, seed, exec)?;
            tables.push(RunTable { algorithm, seed, records });
        }
    }
    let report = build_report(&config.name, config.model.name(), config.sampler.particles, &tables)?;
    Ok((tables, report))
}

pub fn run_file(out: &Path, algorithm: Algorithm, seed: u64) -> PathBuf {
    out.join(RUNS_DIR).join(format!("{algorithm}_seed{seed}.csv"))
}

pub fn write_compare(out: &Path, tables: &[RunTable], report: &CompareReport) -> Result<()> {
    for t in tables {
        io::write_results(&run_file(out, t.algorithm, t.seed), &t.records)?;
    }
    report::write_bias_table(&out.join(COMPARE_FILE), &report::bias_table(tables))?;
    io::write_json(&out.join(REPORT_FILE), report)
}

/// Rebuilds the comparison report from the per-run results files in `out`.
pub fn replay_report(out: &Path, config: &ExperimentConfig) -> Result<CompareReport> {
    let mut tables = Vec::new();
    for &seed in &config.seeds {
        for &algorithm in &config.algorithms {
            let records = io::read_results(&run_file(out, algorithm, seed))?;
            tables.push(RunTable { algorithm, seed, records });
        }
    }
    build_report(&config.name, config.model.name(), config.sampler.particles, &tables)
}
