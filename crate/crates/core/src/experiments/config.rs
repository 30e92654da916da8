//! Experiment configuration files.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussmath::{GaussianDist, Vector};
use crate::model::{erk, Bernoulli, Erk, ForwardModel, LinearGaussian, Lorenz63, PriorSpec};
use crate::smcs::{Algorithm, SmcsConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorConfig {
    Uniform { lower: Vec<f64>, upper: Vec<f64> },
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
}

impl PriorConfig {
    fn dim(&self) -> usize {
        match self {
            PriorConfig::Uniform { lower, .. } => lower.len(),
            PriorConfig::Gaussian { mean, .. } => mean.len(),
        }
    }

    pub fn build(&self) -> Result<PriorSpec> {
        match self {
            PriorConfig::Uniform { lower, upper } => PriorSpec::uniform(lower.clone(), upper.clone()),
            PriorConfig::Gaussian { mean, std } => {
                if mean.len() != std.len() || std.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                    return Err(Error::Config(
                        "model.prior: gaussian needs `mean` and positive `std` of equal length".into(),
                    ));
                }
                Ok(PriorSpec::Gaussian(GaussianDist::diagonal(Vector::from_row_slice(mean), std)?))
            }
        }
    }

    fn gaussian(&self) -> Result<GaussianDist> {
        match self.build()? {
            PriorSpec::Gaussian(g) => Ok(g),
            PriorSpec::UniformBox { .. } => Err(Error::Config("model.prior: the linear model needs a gaussian prior".into())),
        }
    }
}

fn default_lorenz_substeps() -> usize {
    20
}

fn default_erk_substeps() -> usize {
    4
}

fn erk_truth() -> Vec<f64> {
    erk::TRUE_RATES.to_vec()
}

fn erk_prior() -> PriorConfig {
    PriorConfig::Gaussian {
        mean: erk::PRIOR_MEAN.to_vec(),
        std: erk::PRIOR_STD.to_vec(),
    }
}

fn erk_observed() -> Vec<String> {
    erk::OBSERVED.iter().map(|c| format!("x{}", c + 1)).collect()
}

fn erk_initial_state() -> Vec<f64> {
    erk::INITIAL_STATE.to_vec()
}

fn erk_noise_std() -> Vec<f64> {
    erk::NOISE_STD.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Bernoulli {
        dt: f64,
        steps: usize,
        noise_std: f64,
        truth: Vec<f64>,
        prior: PriorConfig,
    },
    Lorenz63 {
        dt: f64,
        steps: usize,
        #[serde(default = "default_lorenz_substeps")]
        substeps: usize,
        initial_state: [f64; 3],
        /// Component names among `x`, `y`, `z`.
        observed: Vec<String>,
        noise_std: f64,
        /// `(α, β, ρ)`.
        truth: Vec<f64>,
        prior: PriorConfig,
    },
    Erk {
        dt: f64,
        steps: usize,
        #[serde(default = "default_erk_substeps")]
        substeps: usize,
        #[serde(default = "erk_initial_state")]
        initial_state: Vec<f64>,
        /// Species names `x1` … `x11`.
        #[serde(default = "erk_observed")]
        observed: Vec<String>,
        /// One entry per species.
        #[serde(default = "erk_noise_std")]
        noise_std: Vec<f64>,
        #[serde(default = "erk_truth")]
        truth: Vec<f64>,
        #[serde(default = "erk_prior")]
        prior: PriorConfig,
    },
    Linear {
        n_x: usize,
        n_y: usize,
        steps: usize,
        noise_std: f64,
        matrix_seed: u64,
        truth: Vec<f64>,
        prior: PriorConfig,
    },
}

fn component_index(name: &str, names: &[&str], field: &str) -> Result<usize> {
    names
        .iter()
        .position(|n| *n == name)
        .ok_or_else(|| Error::Config(format!("{field}: unknown component `{name}` (expected one of {})", names.join(", "))))
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::Bernoulli { .. } => "bernoulli",
            ModelConfig::Lorenz63 { .. } => "lorenz63",
            ModelConfig::Erk { .. } => "erk",
            ModelConfig::Linear { .. } => "linear",
        }
    }

    pub fn truth(&self) -> Vector {
        let t = match self {
            ModelConfig::Bernoulli { truth, .. }
            | ModelConfig::Lorenz63 { truth, .. }
            | ModelConfig::Erk { truth, .. }
            | ModelConfig::Linear { truth, .. } => truth,
        };
        Vector::from_row_slice(t)
    }

    fn prior(&self) -> &PriorConfig {
        match self {
            ModelConfig::Bernoulli { prior, .. }
            | ModelConfig::Lorenz63 { prior, .. }
            | ModelConfig::Erk { prior, .. }
            | ModelConfig::Linear { prior, .. } => prior,
        }
    }

    pub fn build(&self) -> Result<Box<dyn ForwardModel>> {
        let prior = self.prior();
        let truth_len = self.truth().len();
        let expected = match self {
            ModelConfig::Bernoulli { .. } => 1,
            ModelConfig::Lorenz63 { .. } => 3,
            ModelConfig::Erk { .. } => erk::N_RATES,
            ModelConfig::Linear { n_x, .. } => *n_x,
        };
        if truth_len != expected {
            return Err(Error::Config(format!(
                "model.truth: {} model has {expected} parameters, got {truth_len}",
                self.name()
            )));
        }
        if prior.dim() != expected {
            return Err(Error::Config(format!(
                "model.prior: {} model has {expected} parameters, prior has {}",
                self.name(),
                prior.dim()
            )));
        }
        let model: Box<dyn ForwardModel> = match self {
            ModelConfig::Bernoulli { dt, steps, noise_std, .. } => {
                Box::new(Bernoulli::new(*dt, *steps, *noise_std, prior.build()?)?)
            }
            ModelConfig::Lorenz63 {
                dt,
                steps,
                substeps,
                initial_state,
                observed,
                noise_std,
                ..
            } => {
                let observed = observed
                    .iter()
                    .map(|c| component_index(c, &["x", "y", "z"], "model.observed"))
                    .collect::<Result<Vec<_>>>()?;
                Box::new(Lorenz63::new(*dt, *steps, *substeps, *initial_state, observed, *noise_std, prior.build()?)?)
            }
            ModelConfig::Erk {
                dt,
                steps,
                substeps,
                initial_state,
                observed,
                noise_std,
                ..
            } => {
                let names: Vec<String> = (1..=erk::N_SPECIES).map(|i| format!("x{i}")).collect();
                let names: Vec<&str> = names.iter().map(String::as_str).collect();
                let observed = observed
                    .iter()
                    .map(|c| component_index(c, &names, "model.observed"))
                    .collect::<Result<Vec<_>>>()?;
                let initial: [f64; erk::N_SPECIES] = initial_state.as_slice().try_into().map_err(|_| {
                    Error::Config(format!("model.initial_state: expected {} values", erk::N_SPECIES))
                })?;
                let noise: [f64; erk::N_SPECIES] = noise_std.as_slice().try_into().map_err(|_| {
                    Error::Config(format!("model.noise_std: expected {} values", erk::N_SPECIES))
                })?;
                Box::new(Erk::new(*dt, *steps, *substeps, initial, observed, noise, prior.build()?)?)
            }
            ModelConfig::Linear {
                n_x,
                n_y,
                steps,
                noise_std,
                matrix_seed,
                ..
            } => {
                if *n_y == 0 || *steps == 0 || !(*noise_std > 0.0) {
                    return Err(Error::Config("model: linear needs n_y >= 1, steps >= 1, noise_std > 0".into()));
                }
                Box::new(LinearGaussian::random(*n_x, *n_y, *steps, *noise_std, prior.gaussian()?, *matrix_seed)?)
            }
        };
        Ok(model)
    }
}

fn default_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}

fn default_sampler_algorithm() -> Algorithm {
    Algorithm::EnkfSmcsWr
}

fn default_delta() -> f64 {
    1e-4
}

fn default_fraction() -> f64 {
    0.5
}

fn default_delta_t_max() -> usize {
    10
}

/// Sampler settings shared by every run of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub particles: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_fraction")]
    pub ess_min_fraction: f64,
    #[serde(default = "default_delta_t_max")]
    pub delta_t_max: usize,
    #[serde(default = "default_fraction")]
    pub ess_resample_fraction: f64,
    /// Used by `infer` when no algorithm is given on the command line.
    #[serde(default = "default_sampler_algorithm")]
    pub algorithm: Algorithm,
}

impl SamplerConfig {
    pub fn smcs(&self, algorithm: Algorithm, seed: u64) -> SmcsConfig {
        SmcsConfig {
            particles: self.particles,
            delta: self.delta,
            ess_min_fraction: self.ess_min_fraction,
            delta_t_max: self.delta_t_max,
            ess_resample_fraction: self.ess_resample_fraction,
            algorithm,
            seed,
            exec: Default::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    pub model: ModelConfig,
    pub sampler: SamplerConfig,
    /// Algorithms compared by `compare`.
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    /// Sampler seeds; `infer` uses the first.
    pub seeds: Vec<u64>,
    /// Seed of the synthetic observation noise.
    pub data_seed: u64,
    /// Output directory.
    pub output: String,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            e => e,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds: must not be empty".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("algorithms: must not be empty".into()));
        }
        self.sampler
            .smcs(self.sampler.algorithm, 0)
            .validate()
            .map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("sampler.{msg}")),
                e => e,
            })?;
        self.model.build()?;
        Ok(())
    }

    pub fn build_model(&self) -> Result<Box<dyn ForwardModel>> {
        self.model.build()
    }

    pub fn truth(&self) -> Vector {
        self.model.truth()
    }
}
