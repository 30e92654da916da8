//! Drivers for EnKF-SMCS and EnKF-SMCS-WR.
//!
//! Model-evaluation accounting (one count per trajectory integration):
//! `M` calls for `G_1(x_0)` at initialization, then one call per particle and
//! step at the new location `x_t`, which returns the data needed for the
//! step's weight together with `G_{t+1}(x_t)` for the next gain. A WR
//! refinement adds one call per particle to evaluate `π_t(x_t)`. Hence after
//! step `t` an EnKF-SMCS run has made `M(t+1)` calls and an EnKF-SMCS-WR run
//! `M(t+1) + M·(refinements so far)`.

use std::time::Instant;

use crate::enkf::{fill_divergent, kalman_gain, predict_with_fallback, prior_moments, AugmentedEnsemble};
use crate::error::{Error, Result, StepContext};
use crate::gaussmath::Vector;
use crate::model::{validate_observations, EvalCounter, ForwardModel, ObservationRecord};
use crate::parallel::{map_indexed, try_map_indexed, Execution};
use crate::record::{bias, weighted_summary, RunRecord};
use crate::rng::{stream, Purpose};

use super::kernel::{
    approx_incremental_log_weight, build_forward_kernel, incremental_log_weight, refined_log_weight,
    sample_forward, KernelPair, ParticleHistory,
};
use super::weights::{ess, linear_weights, normalize_log_weights};
use super::{Algorithm, ParticleEnsemble, SmcsConfig};

/// Snapshot handed to the observer of [`run_sampler_with`] after every step,
/// before any resampling is applied.
pub struct StepView<'a> {
    pub t: usize,
    pub kernel: &'a KernelPair,
    /// `x_{t−1}` and `G_t(x_{t−1})`.
    pub xs_prev: &'a [Vector],
    pub zs_prev: &'a [Vector],
    /// `x_t`.
    pub xs: &'a [Vector],
    pub stream_ids: &'a [u64],
    /// Normalized log-weights reported for this step (exact when `refined`).
    pub log_weights: &'a [f64],
    /// Normalized approximate log-weights (EnKF-SMCS-WR only).
    pub approx_log_weights: Option<&'a [f64]>,
    /// Paths since the last exact-weight step, including step `t`
    /// (EnKF-SMCS-WR only).
    pub histories: Option<&'a [ParticleHistory]>,
    pub refined: bool,
    pub resampled: bool,
    pub ess: f64,
    pub model_evals: u64,
}

struct State {
    ens: ParticleEnsemble,
    /// `G_{t}(x_{t−1})` for the upcoming step `t`.
    zs: Vec<Vector>,
    /// `log π(x)` at the last exact-weight step.
    logpost: Vec<f64>,
}

impl State {
    fn reindex(&mut self, ancestors: &[usize]) {
        self.zs = ancestors.iter().map(|&a| self.zs[a].clone()).collect();
        self.logpost = ancestors.iter().map(|&a| self.logpost[a]).collect();
    }
}

/// EnKF-SMCS: exact weights at every step.
pub fn run_enkf_smcs(
    model: &dyn ForwardModel,
    data: &[ObservationRecord],
    truth: &Vector,
    config: &SmcsConfig,
) -> Result<Vec<RunRecord>> {
    let mut config = config.clone();
    config.algorithm = Algorithm::EnkfSmcs;
    run_sampler_with(model, data, truth, &config, &mut |_| {})
}

/// EnKF-SMCS-WR: approximate weights with occasional exact refinement.
pub fn run_enkf_smcs_wr(
    model: &dyn ForwardModel,
    data: &[ObservationRecord],
    truth: &Vector,
    config: &SmcsConfig,
) -> Result<Vec<RunRecord>> {
    let mut config = config.clone();
    config.algorithm = Algorithm::EnkfSmcsWr;
    run_sampler_with(model, data, truth, &config, &mut |_| {})
}

/// Runs the sampler selected by `config.algorithm`, starting from `q₀ = π₀`.
pub fn run_sampler_with(
    model: &dyn ForwardModel,
    data: &[ObservationRecord],
    truth: &Vector,
    config: &SmcsConfig,
    observer: &mut dyn FnMut(&StepView),
) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let xs = map_indexed(config.particles, config.exec, |m| {
        let mut rng = stream(config.seed, Purpose::Init, 0, m as u64);
        model.prior().sample(&mut rng)
    });
    run_sampler_from(model, data, truth, config, ParticleEnsemble::uniform(xs), observer)
}

/// Runs the sampler from a given weighted ensemble `q₀` whose weights are
/// `π₀/q₀` up to a constant.
pub fn run_sampler_from(
    model: &dyn ForwardModel,
    data: &[ObservationRecord],
    truth: &Vector,
    config: &SmcsConfig,
    initial: ParticleEnsemble,
    observer: &mut dyn FnMut(&StepView),
) -> Result<Vec<RunRecord>> {
    config.validate()?;
    validate_observations(model, data)?;
    if config.algorithm == Algorithm::EnkfOnly {
        return Err(Error::Config("algorithm: enkf_only has no importance weights".into()));
    }
    if initial.len() != config.particles || initial.stream_ids.len() != initial.len() {
        return Err(Error::Dimension(format!(
            "initial ensemble of {} particles, configuration asks for {}",
            initial.len(),
            config.particles
        )));
    }
    let wr = config.algorithm == Algorithm::EnkfSmcsWr;
    let started = Instant::now();
    let counter = EvalCounter::new();
    let steps = model.steps();
    let exec = config.exec;
    let m = config.particles;

    let mut state = {
        let (zs, divergent) = predict_with_fallback(model, &counter, &initial.xs, 1, exec).at_step(1)?;
        let logpost: Vec<f64> = initial.xs.iter().map(|x| model.prior().log_density(x)).collect();
        let mut ens = initial;
        for (w, d) in ens.log_weights.iter_mut().zip(&divergent) {
            if *d {
                *w = f64::NEG_INFINITY;
            }
        }
        ens.normalize().at_step(1)?;
        State { ens, zs, logpost }
    };
    let mut histories: Vec<ParticleHistory> = if wr {
        (0..m)
            .map(|i| ParticleHistory::new(0, state.ens.xs[i].clone(), state.ens.log_weights[i], state.logpost[i]))
            .collect()
    } else {
        Vec::new()
    };
    let mut t0 = 0;
    let mut records = Vec::with_capacity(steps);

    for obs in data {
        let t = obs.t;
        let kernel = forward_kernel(model, &state, obs, config).at_step(t)?;
        let x_new = sample_forward(&kernel, &state.ens.xs, &state.zs, config.seed, t, &state.ens.stream_ids, exec);
        let last = (t + 1).min(steps);

        let (log_weights, approx, refined, next_z, step_ess) = if wr {
            let preds = evaluate_paths(model, &counter, &x_new, t, last, exec).at_step(t)?;
            let mut approx: Vec<f64> = map_indexed(m, exec, |i| {
                let loglik = preds[i]
                    .as_ref()
                    .map_or(f64::NEG_INFINITY, |p| model.log_likelihood(t, &p[0], &obs.y));
                state.ens.log_weights[i]
                    + approx_incremental_log_weight(&kernel, &state.ens.xs[i], &state.zs[i], &x_new[i], loglik)
            });
            normalize_log_weights(&mut approx).at_step(t)?;
            let approx_ess = ess(&approx);
            let terms = map_indexed(m, exec, |i| {
                (
                    kernel.log_backward(&state.ens.xs[i], &x_new[i]),
                    kernel.log_forward(&state.ens.xs[i], &state.zs[i], &x_new[i]),
                )
            });
            for (i, (lb, lf)) in terms.into_iter().enumerate() {
                histories[i].push(state.zs[i].clone(), x_new[i].clone(), lb, lf);
            }
            let next_z = fill_divergent(preds.into_iter().map(|p| p.map(|mut p| p.pop().unwrap())).collect(), model.obs_dim()).0;
            let refine = approx_ess < config.ess_min() || t - t0 > config.delta_t_max || t == steps;
            if refine {
                let full = evaluate_paths(model, &counter, &x_new, 1, t, exec).at_step(t)?;
                let logpost = map_indexed(m, exec, |i| log_posterior(model, data, &x_new[i], full[i].as_deref()));
                let mut exact = map_indexed(m, exec, |i| refined_log_weight(&histories[i], logpost[i]));
                normalize_log_weights(&mut exact).at_step(t)?;
                state.logpost = logpost;
                let exact_ess = ess(&exact);
                (exact, Some(approx), true, next_z, exact_ess)
            } else {
                (approx, None, false, next_z, approx_ess)
            }
        } else {
            let preds = evaluate_paths(model, &counter, &x_new, 1, last, exec).at_step(t)?;
            let logpost = map_indexed(m, exec, |i| log_posterior(model, data, &x_new[i], preds[i].as_ref().map(|p| &p[..t])));
            let mut exact: Vec<f64> = map_indexed(m, exec, |i| {
                state.ens.log_weights[i]
                    + incremental_log_weight(&kernel, &state.ens.xs[i], &state.zs[i], &x_new[i], logpost[i], state.logpost[i])
            });
            normalize_log_weights(&mut exact).at_step(t)?;
            state.logpost = logpost;
            let next_z = fill_divergent(preds.into_iter().map(|p| p.map(|mut p| p.pop().unwrap())).collect(), model.obs_dim()).0;
            let exact_ess = ess(&exact);
            (exact, None, true, next_z, exact_ess)
        };

        if refined && step_ess < 2.0 {
            return Err(Error::DegenerateEnsemble { ess: step_ess }.at_step(t));
        }
        let resample = refined && step_ess < config.ess_resample();
        let (mean, std) = weighted_summary(&x_new, &linear_weights(&log_weights));
        if refined {
            t0 = t;
        }
        observer(&StepView {
            t,
            kernel: &kernel,
            xs_prev: &state.ens.xs,
            zs_prev: &state.zs,
            xs: &x_new,
            stream_ids: &state.ens.stream_ids,
            log_weights: &log_weights,
            approx_log_weights: approx.as_deref().or(if wr { Some(&log_weights) } else { None }),
            histories: if wr { Some(&histories) } else { None },
            refined,
            resampled: resample,
            ess: step_ess,
            model_evals: counter.get(),
        });
        records.push(RunRecord {
            t,
            bias: bias(&mean, truth),
            mean,
            std,
            ess: step_ess,
            refined,
            resampled: resample,
            model_evals: counter.get(),
            t0,
            wall_time: started.elapsed().as_secs_f64(),
        });

        state.ens.xs = x_new;
        state.ens.log_weights = log_weights;
        state.zs = next_z;
        if resample {
            let mut rng = stream(config.seed, Purpose::Resample, t, 0);
            let ancestors = state.ens.resample_systematic(&mut rng);
            state.reindex(&ancestors);
        }
        if wr && refined {
            for (i, h) in histories.iter_mut().enumerate() {
                *h = ParticleHistory::new(t, state.ens.xs[i].clone(), state.ens.log_weights[i], state.logpost[i]);
            }
        }
    }
    Ok(records)
}

/// `K_t` and `L̂_{t−1}` from the weighted moments of `[x_{t−1}, G_t(x_{t−1})]`.
fn forward_kernel(
    model: &dyn ForwardModel,
    state: &State,
    obs: &ObservationRecord,
    config: &SmcsConfig,
) -> Result<KernelPair> {
    let aug = AugmentedEnsemble::new(state.ens.xs.clone(), state.zs.clone())?;
    let weights = state.ens.weights();
    let (mean, cov) = prior_moments(&aug, Some(&weights))?;
    let noise = model.noise(obs.t);
    let gain = kalman_gain(mean, cov, noise.cov(), model.param_dim())?;
    build_forward_kernel(&gain, &obs.y, noise.cov(), config.delta)
}

/// `[G_first(x), …, G_last(x)]` per particle, `None` where the model diverged.
fn evaluate_paths(
    model: &dyn ForwardModel,
    counter: &EvalCounter,
    xs: &[Vector],
    first: usize,
    last: usize,
    exec: Execution,
) -> Result<Vec<Option<Vec<Vector>>>> {
    try_map_indexed(xs.len(), exec, |i| match counter.predict_range(model, &xs[i], first, last) {
        Ok(p) if p.iter().all(|z| z.iter().all(|v| v.is_finite())) => Ok(Some(p)),
        Ok(_) | Err(Error::NonFiniteState) | Err(Error::Domain(_)) => Ok(None),
        Err(e) => Err(e),
    })
}

/// `log π₀(x) + Σ_{s≤t} log π(y_s|x)` from `G_1(x), …, G_t(x)`.
fn log_posterior(
    model: &dyn ForwardModel,
    data: &[ObservationRecord],
    x: &Vector,
    predictions: Option<&[Vector]>,
) -> f64 {
    let Some(predictions) = predictions else {
        return f64::NEG_INFINITY;
    };
    let mut total = model.prior().log_density(x);
    if total == f64::NEG_INFINITY {
        return total;
    }
    for (obs, pred) in data.iter().zip(predictions) {
        total += model.log_likelihood(obs.t, pred, &obs.y);
    }
    total
}
