//! Sequential Monte Carlo samplers with an EnKF forward kernel.
//!
//! [`Algorithm::EnkfSmcs`] computes exact weights at every step.
//! [`Algorithm::EnkfSmcsWr`] carries cheap approximate weights, in which the
//! intractable `π_{t−1}` is replaced by its Gaussian fit `q̂_{t−1}`, and
//! recovers exact weights from the stored particle paths only when the
//! approximate ESS drops, after `ΔT_max` steps, or at the final step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::enkf::{enkf_run, EnkfOptions};
use crate::error::{Error, Result};
use crate::gaussmath::Vector;
use crate::model::{ForwardModel, ObservationRecord};
use crate::parallel::Execution;
use crate::record::RunRecord;

pub mod kernel;
pub mod oracle;
pub mod sampler;
pub mod weights;

pub use kernel::{
    approx_incremental_log_weight, build_forward_kernel, incremental_log_weight, refined_log_weight,
    sample_forward, AffineGaussian, KernelPair, ParticleHistory,
};
pub use sampler::{run_enkf_smcs, run_enkf_smcs_wr, run_sampler_with, StepView};
pub use weights::{ess, normalize_log_weights, offspring_counts, resample_indices, systematic_ancestors};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    EnkfOnly,
    EnkfSmcs,
    EnkfSmcsWr,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::EnkfOnly, Algorithm::EnkfSmcs, Algorithm::EnkfSmcsWr];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::EnkfOnly => "enkf_only",
            Algorithm::EnkfSmcs => "enkf_smcs",
            Algorithm::EnkfSmcsWr => "enkf_smcs_wr",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}` (expected enkf_only, enkf_smcs or enkf_smcs_wr)")))
    }
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

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmcsConfig {
    pub particles: usize,
    /// Scale of the `δ²Σ^q` regularization in `Σ^K`.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Refine when the approximate ESS falls below this fraction of `M`.
    #[serde(default = "default_fraction")]
    pub ess_min_fraction: f64,
    /// Refine when more than this many steps passed since the last exact weights.
    #[serde(default = "default_delta_t_max")]
    pub delta_t_max: usize,
    /// Resample when the exact ESS falls below this fraction of `M`.
    #[serde(default = "default_fraction")]
    pub ess_resample_fraction: f64,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub seed: u64,
    #[serde(skip)]
    pub exec: Execution,
}

impl SmcsConfig {
    pub fn new(algorithm: Algorithm, particles: usize, seed: u64) -> Self {
        Self {
            particles,
            delta: default_delta(),
            ess_min_fraction: default_fraction(),
            delta_t_max: default_delta_t_max(),
            ess_resample_fraction: default_fraction(),
            algorithm,
            seed,
            exec: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles < 2 {
            return Err(Error::Config(format!("particles: need at least 2, got {}", self.particles)));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::Config(format!("delta: must be positive, got {}", self.delta)));
        }
        for (name, v) in [
            ("ess_min_fraction", self.ess_min_fraction),
            ("ess_resample_fraction", self.ess_resample_fraction),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name}: must lie in (0, 1], got {v}")));
            }
        }
        if self.delta_t_max < 1 {
            return Err(Error::Config("delta_t_max: must be at least 1".into()));
        }
        Ok(())
    }

    pub fn ess_min(&self) -> f64 {
        self.ess_min_fraction * self.particles as f64
    }

    pub fn ess_resample(&self) -> f64 {
        self.ess_resample_fraction * self.particles as f64
    }
}

/// Weighted particles `{(x^m, w^m)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble {
    pub xs: Vec<Vector>,
    /// Normalized log-weights.
    pub log_weights: Vec<f64>,
    /// Random stream of each particle; reset to slot indices by resampling.
    pub stream_ids: Vec<u64>,
}

impl ParticleEnsemble {
    /// Equally weighted ensemble with streams `0..M`.
    pub fn uniform(xs: Vec<Vector>) -> Self {
        let m = xs.len();
        Self {
            xs,
            log_weights: vec![-(m as f64).ln(); m],
            stream_ids: (0..m as u64).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn normalize(&mut self) -> Result<()> {
        normalize_log_weights(&mut self.log_weights)
    }

    pub fn ess(&self) -> f64 {
        ess(&self.log_weights)
    }

    pub fn weights(&self) -> Vec<f64> {
        weights::linear_weights(&self.log_weights)
    }

    /// Systematic resampling; returns the ancestor of every new slot.
    pub fn resample_systematic<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<usize> {
        let ancestors = resample_indices(&self.log_weights, rng);
        self.xs = ancestors.iter().map(|&a| self.xs[a].clone()).collect();
        let m = self.len();
        self.log_weights = vec![-(m as f64).ln(); m];
        self.stream_ids = (0..m as u64).collect();
        ancestors
    }
}

/// Runs the configured algorithm over `data`.
pub fn run(
    model: &dyn ForwardModel,
    data: &[ObservationRecord],
    truth: &Vector,
    config: &SmcsConfig,
) -> Result<Vec<RunRecord>> {
    config.validate()?;
    match config.algorithm {
        Algorithm::EnkfOnly => enkf_run(
            model,
            data,
            truth,
            &EnkfOptions {
                particles: config.particles,
                seed: config.seed,
                exec: config.exec,
            },
        ),
        Algorithm::EnkfSmcs => run_enkf_smcs(model, data, truth, config),
        Algorithm::EnkfSmcsWr => run_enkf_smcs_wr(model, data, truth, config),
    }
}
