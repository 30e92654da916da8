//! Forward models `G_t`, priors and synthetic observations.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::error::{Error, Result};
use crate::gaussmath::{GaussianDist, Matrix, Vector};
use crate::rng::{stream, Purpose};

pub mod bernoulli;
pub mod erk;
pub mod linear;
pub mod lorenz;
pub mod ode;

pub use bernoulli::{bernoulli_solution, Bernoulli};
pub use erk::{erk_rhs, Erk};
pub use linear::LinearGaussian;
pub use lorenz::{lorenz63_rhs, Lorenz63};
pub use ode::integrate_fixed_rk4;

/// Prior `π₀` over the parameter vector.
#[derive(Clone, Debug)]
pub enum PriorSpec {
    UniformBox { lower: Vec<f64>, upper: Vec<f64> },
    Gaussian(GaussianDist),
}

impl PriorSpec {
    pub fn uniform(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Config("uniform prior bounds must be non-empty and of equal length".into()));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!(
                    "uniform prior coordinate {i}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(PriorSpec::UniformBox { lower, upper })
    }

    pub fn gaussian(mean: Vector, cov: Matrix) -> Result<Self> {
        Ok(PriorSpec::Gaussian(GaussianDist::new(mean, cov)?))
    }

    pub fn dim(&self) -> usize {
        match self {
            PriorSpec::UniformBox { lower, .. } => lower.len(),
            PriorSpec::Gaussian(g) => g.dim(),
        }
    }

    /// `log π₀(x)`; `-∞` outside the support.
    pub fn log_density(&self, x: &Vector) -> f64 {
        match self {
            PriorSpec::UniformBox { lower, upper } => {
                let mut log_vol = 0.0;
                for ((v, lo), hi) in x.iter().zip(lower).zip(upper) {
                    if !(v >= lo && v <= hi) {
                        return f64::NEG_INFINITY;
                    }
                    log_vol += (hi - lo).ln();
                }
                -log_vol
            }
            PriorSpec::Gaussian(g) => g.logpdf(x),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        match self {
            PriorSpec::UniformBox { lower, upper } => Vector::from_iterator(
                lower.len(),
                lower.iter().zip(upper).map(|(lo, hi)| rng.random_range(*lo..*hi)),
            ),
            PriorSpec::Gaussian(g) => g.sample(rng),
        }
    }
}

/// One observation `y_t`, with `t` counted from 1.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationRecord {
    pub t: usize,
    pub y: Vector,
}

/// The map `x ↦ G_t(x)` for `t = 1..=T` plus its noise model.
///
/// Implementations must be deterministic and reentrant: the samplers call
/// them concurrently for different particles.
pub trait ForwardModel: Send + Sync {
    fn name(&self) -> &str;
    /// `n_x`.
    fn param_dim(&self) -> usize;
    /// `n_y`.
    fn obs_dim(&self) -> usize;
    /// `T`.
    fn steps(&self) -> usize;
    fn prior(&self) -> &PriorSpec;
    /// Observation noise `N(0, R_t)`.
    fn noise(&self, t: usize) -> &GaussianDist;

    /// `[G_first(x), …, G_last(x)]`, `1 ≤ first ≤ last ≤ T`.
    ///
    /// For trajectory models this is a single integration up to `last`, which
    /// is why the samplers count one model evaluation per call.
    fn predict_range(&self, x: &Vector, first: usize, last: usize) -> Result<Vec<Vector>>;

    fn predict(&self, x: &Vector, t: usize) -> Result<Vector> {
        Ok(self.predict_range(x, t, t)?.pop().expect("non-empty range"))
    }

    /// `log π(y_t | x)` given `prediction = G_t(x)`.
    fn log_likelihood(&self, t: usize, prediction: &Vector, y: &Vector) -> f64 {
        self.noise(t).logpdf_residual(&(y - prediction))
    }
}

pub(crate) fn check_range(first: usize, last: usize, steps: usize) -> Result<()> {
    if first == 0 || first > last || last > steps {
        return Err(Error::Dimension(format!(
            "prediction range {first}..={last} outside 1..={steps}"
        )));
    }
    Ok(())
}

/// Counts calls into a [`ForwardModel`].
#[derive(Debug, Default)]
pub struct EvalCounter(AtomicU64);

impl EvalCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    pub fn predict_range(
        &self,
        model: &dyn ForwardModel,
        x: &Vector,
        first: usize,
        last: usize,
    ) -> Result<Vec<Vector>> {
        self.0.fetch_add(1, Ordering::Relaxed);
        model.predict_range(x, first, last)
    }

    pub fn predict(&self, model: &dyn ForwardModel, x: &Vector, t: usize) -> Result<Vector> {
        self.0.fetch_add(1, Ordering::Relaxed);
        model.predict(x, t)
    }
}

/// `y_t = G_t(x_true) + η_t`, `η_t ~ N(0, R_t)`, for `t = 1..=T`.
pub fn simulate_observations(
    model: &dyn ForwardModel,
    x_true: &Vector,
    seed: u64,
) -> Result<Vec<ObservationRecord>> {
    if x_true.len() != model.param_dim() {
        return Err(Error::Dimension(format!(
            "truth has {} coordinates, model {} expects {}",
            x_true.len(),
            model.name(),
            model.param_dim()
        )));
    }
    let steps = model.steps();
    let preds = model.predict_range(x_true, 1, steps)?;
    Ok(preds
        .into_iter()
        .enumerate()
        .map(|(i, g)| {
            let t = i + 1;
            let mut rng = stream(seed, Purpose::Data, t, 0);
            ObservationRecord {
                t,
                y: g + model.noise(t).sample_centered(&mut rng),
            }
        })
        .collect())
}

/// Checks that `data` covers steps `1..=T` in order with the model's `n_y`.
pub fn validate_observations(model: &dyn ForwardModel, data: &[ObservationRecord]) -> Result<()> {
    if data.len() != model.steps() {
        return Err(Error::Dimension(format!(
            "{} observations for a {}-step model",
            data.len(),
            model.steps()
        )));
    }
    for (i, rec) in data.iter().enumerate() {
        if rec.t != i + 1 {
            return Err(Error::Dimension(format!("observation {} has step index {}", i + 1, rec.t)));
        }
        if rec.y.len() != model.obs_dim() {
            return Err(Error::Dimension(format!(
                "observation at step {} has {} components, model expects {}",
                rec.t,
                rec.y.len(),
                model.obs_dim()
            )));
        }
    }
    Ok(())
}

/// Coordinate-wise median of a non-empty set of vectors.
pub(crate) fn coordinatewise_median<'a>(values: impl Iterator<Item = &'a Vector>, dim: usize) -> Vector {
    let values: Vec<&Vector> = values.collect();
    let mut out = Vector::zeros(dim);
    if values.is_empty() {
        return out;
    }
    let mut col = Vec::with_capacity(values.len());
    for j in 0..dim {
        col.clear();
        col.extend(values.iter().map(|v| v[j]));
        col.sort_by(|a, b| a.total_cmp(b));
        let n = col.len();
        out[j] = if n % 2 == 1 {
            col[n / 2]
        } else {
            0.5 * (col[n / 2 - 1] + col[n / 2])
        };
    }
    out
}
