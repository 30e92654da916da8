//! Ensemble Kalman filter for static parameters.
//!
//! Parameter estimation is cast as filtering of the artificial dynamics
//! `u_t = [x_t, z_t]`, `x_t = x_{t−1}`, `z_t = G_t(x_t)`, observed through
//! `H = [0, I]`. The gain and moment routines here are shared with the
//! samplers, which build their forward kernel from the same quantities.
//!
//! The perturbed-observation update follows the sign convention
//! `u ← ũ + Q(y − (Hũ − η))`, i.e. the simulated noise is added to the
//! innovation. Either sign gives the same posterior covariance.

use std::time::Instant;

use crate::error::{Error, Result, StepContext};
use crate::gaussmath::{solve_spd, symmetrize, weighted_mean_cov, GaussianDist, Matrix, Vector};
use crate::model::{coordinatewise_median, validate_observations, EvalCounter, ForwardModel, ObservationRecord};
use crate::parallel::{map_indexed, try_map_indexed, Execution};
use crate::record::{bias, weighted_summary, RunRecord};
use crate::rng::{stream, Purpose};

/// Particles `x` with their predicted observations `z = G_t(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedEnsemble {
    pub xs: Vec<Vector>,
    pub zs: Vec<Vector>,
}

impl AugmentedEnsemble {
    pub fn new(xs: Vec<Vector>, zs: Vec<Vector>) -> Result<Self> {
        if xs.len() != zs.len() {
            return Err(Error::Dimension(format!("{} parameter rows but {} prediction rows", xs.len(), zs.len())));
        }
        Ok(Self { xs, zs })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn param_dim(&self) -> usize {
        self.xs.first().map_or(0, |x| x.len())
    }

    /// Stacked `u = [x, z]` vectors.
    pub fn stacked(&self) -> Vec<Vector> {
        self.xs
            .iter()
            .zip(&self.zs)
            .map(|(x, z)| Vector::from_iterator(x.len() + z.len(), x.iter().chain(z.iter()).copied()))
            .collect()
    }
}

/// Kalman gain of the augmented system together with the prior moments it
/// was computed from.
#[derive(Clone, Debug)]
pub struct GainBundle {
    /// `Q_t`, `(n_x+n_y)×n_y`.
    pub gain: Matrix,
    /// `Q^x_t`, the top `n_x` rows of `Q_t`.
    pub gain_x: Matrix,
    /// `μ̃_t`.
    pub mean: Vector,
    /// `C̃_t`.
    pub cov: Matrix,
    n_x: usize,
}

impl GainBundle {
    pub fn param_dim(&self) -> usize {
        self.n_x
    }

    pub fn obs_dim(&self) -> usize {
        self.mean.len() - self.n_x
    }

    /// Parameter block of `μ̃_t`.
    pub fn param_mean(&self) -> Vector {
        self.mean.rows(0, self.n_x).into_owned()
    }

    /// Parameter block of `C̃_t`.
    pub fn param_cov(&self) -> Matrix {
        self.cov.view((0, 0), (self.n_x, self.n_x)).into_owned()
    }

    /// Prediction block of `μ̃_t`, i.e. `ȳ_t`.
    pub fn predicted_mean(&self) -> Vector {
        self.mean.rows(self.n_x, self.obs_dim()).into_owned()
    }
}

/// `μ̃_t, C̃_t` of the stacked ensemble; see [`weighted_mean_cov`].
pub fn prior_moments(ens: &AugmentedEnsemble, weights: Option<&[f64]>) -> Result<(Vector, Matrix)> {
    weighted_mean_cov(&ens.stacked(), weights)
}

/// `Q_t = C̃Hᵀ(HC̃Hᵀ + R)⁻¹` using the block structure of `H = [0, I]`.
pub fn kalman_gain(mean: Vector, cov: Matrix, r: &Matrix, n_x: usize) -> Result<GainBundle> {
    let d = cov.nrows();
    if cov.ncols() != d || mean.len() != d || d <= n_x || r.nrows() != d - n_x || r.ncols() != d - n_x {
        return Err(Error::Dimension(format!(
            "gain with {}x{} prior covariance, n_x = {n_x}, {}x{} noise",
            cov.nrows(),
            cov.ncols(),
            r.nrows(),
            r.ncols()
        )));
    }
    let n_y = d - n_x;
    let cross = cov.columns(n_x, n_y).into_owned();
    let innovation = symmetrize(&(cov.view((n_x, n_x), (n_y, n_y)) + r));
    // innovation is symmetric, so Qᵀ = S⁻¹ (C̃Hᵀ)ᵀ
    let gain = solve_spd(&innovation, &cross.transpose())?.transpose();
    let gain_x = gain.rows(0, n_x).into_owned();
    Ok(GainBundle {
        gain,
        gain_x,
        mean,
        cov,
        n_x,
    })
}

/// Perturbed-observation update. Frozen particles are copied unchanged.
#[allow(clippy::too_many_arguments)]
pub fn enkf_update(
    ens: &AugmentedEnsemble,
    gain: &GainBundle,
    y: &Vector,
    noise: &GaussianDist,
    seed: u64,
    step: usize,
    stream_ids: &[u64],
    frozen: &[bool],
    exec: Execution,
) -> AugmentedEnsemble {
    let n_x = gain.param_dim();
    let n_y = gain.obs_dim();
    let updated = map_indexed(ens.len(), exec, |m| {
        let (x, z) = (&ens.xs[m], &ens.zs[m]);
        if frozen.get(m).copied().unwrap_or(false) {
            return (x.clone(), z.clone());
        }
        let mut rng = stream(seed, Purpose::Observation, step, stream_ids[m]);
        let eta = noise.sample_centered(&mut rng);
        let innovation = y - z + eta;
        let shift = &gain.gain * innovation;
        (x + shift.rows(0, n_x), z + shift.rows(n_x, n_y))
    });
    let (xs, zs) = updated.into_iter().unzip();
    AugmentedEnsemble { xs, zs }
}

#[derive(Clone, Copy, Debug)]
pub struct EnkfOptions {
    pub particles: usize,
    pub seed: u64,
    pub exec: Execution,
}

/// Evaluates `G_t` at every particle. Non-finite predictions are replaced by
/// the median of the finite ones and the particle is marked.
pub(crate) fn predict_with_fallback(
    model: &dyn ForwardModel,
    counter: &EvalCounter,
    xs: &[Vector],
    t: usize,
    exec: Execution,
) -> Result<(Vec<Vector>, Vec<bool>)> {
    let raw = try_map_indexed(xs.len(), exec, |m| match counter.predict(model, &xs[m], t) {
        Ok(z) if z.iter().all(|v| v.is_finite()) => Ok(Some(z)),
        Ok(_) | Err(Error::NonFiniteState) | Err(Error::Domain(_)) => Ok(None),
        Err(e) => Err(e),
    })?;
    Ok(fill_divergent(raw, model.obs_dim()))
}

pub(crate) fn fill_divergent(raw: Vec<Option<Vector>>, n_y: usize) -> (Vec<Vector>, Vec<bool>) {
    let divergent: Vec<bool> = raw.iter().map(Option::is_none).collect();
    if !divergent.iter().any(|d| *d) {
        return (raw.into_iter().map(Option::unwrap).collect(), divergent);
    }
    let median = coordinatewise_median(raw.iter().flatten(), n_y);
    let zs = raw.into_iter().map(|z| z.unwrap_or_else(|| median.clone())).collect();
    (zs, divergent)
}

/// Stand-alone EnKF over the whole data set.
pub fn enkf_run(
    model: &dyn ForwardModel,
    data: &[ObservationRecord],
    truth: &Vector,
    opts: &EnkfOptions,
) -> Result<Vec<RunRecord>> {
    validate_observations(model, data)?;
    let m = opts.particles;
    if m < 2 {
        return Err(Error::DegenerateEnsemble { ess: m as f64 }.at_step(1));
    }
    let started = Instant::now();
    let counter = EvalCounter::new();
    let stream_ids: Vec<u64> = (0..m as u64).collect();
    let mut xs = map_indexed(m, opts.exec, |i| {
        let mut rng = stream(opts.seed, Purpose::Init, 0, stream_ids[i]);
        model.prior().sample(&mut rng)
    });
    let mut frozen = vec![false; m];
    let uniform = vec![1.0 / m as f64; m];
    let mut records = Vec::with_capacity(data.len());
    for obs in data {
        let t = obs.t;
        let (zs, divergent) = predict_with_fallback(model, &counter, &xs, t, opts.exec).at_step(t)?;
        for (f, d) in frozen.iter_mut().zip(&divergent) {
            *f |= *d;
        }
        let ens = AugmentedEnsemble { xs, zs };
        let (mean, cov) = prior_moments(&ens, None).at_step(t)?;
        let noise = model.noise(t);
        let gain = kalman_gain(mean, cov, noise.cov(), model.param_dim()).at_step(t)?;
        let updated = enkf_update(&ens, &gain, &obs.y, noise, opts.seed, t, &stream_ids, &frozen, opts.exec);
        xs = updated.xs;
        let (mean, std) = weighted_summary(&xs, &uniform);
        records.push(RunRecord {
            t,
            bias: bias(&mean, truth),
            mean,
            std,
            ess: m as f64,
            refined: false,
            resampled: false,
            model_evals: counter.get(),
            t0: 0,
            wall_time: started.elapsed().as_secs_f64(),
        });
    }
    Ok(records)
}
