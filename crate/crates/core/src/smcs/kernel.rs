//! EnKF-derived forward kernel `K_t` and Gaussian backward kernel `L̂_{t−1}`.
//!
//! `K_t(·|x) = N(T_t(x), Σ^K)` with `T_t(x) = x + Q^x(y_t − G_t(x))` and
//! `Σ^K = Q^x R (Q^x)ᵀ + δ²Σ^q`. The backward kernel is the exact Gaussian
//! conditional of `x_{t−1}` given `x_t` under `q̂_{t−1} = N(ξ, Σ^q)` and the
//! linearized kernel `K̂_t(·|x) = N(x + Q^x(y_t − ȳ_t), Σ^K)`.

use crate::error::Result;
use crate::enkf::GainBundle;
use crate::gaussmath::{solve_spd, symmetrize, GaussianDist, Matrix, Vector};
use crate::parallel::{map_indexed, Execution};
use crate::rng::{stream, Purpose};

/// Conditional `N(coef·x + offset, cov)`.
#[derive(Clone, Debug)]
pub struct AffineGaussian {
    pub coef: Matrix,
    pub offset: Vector,
    pub noise: GaussianDist,
}

impl AffineGaussian {
    pub fn mean(&self, given: &Vector) -> Vector {
        &self.coef * given + &self.offset
    }

    /// `log N(target; coef·given + offset, cov)`.
    pub fn log_density(&self, target: &Vector, given: &Vector) -> f64 {
        self.noise.logpdf_residual(&(target - self.mean(given)))
    }

    pub fn cov(&self) -> &Matrix {
        self.noise.cov()
    }
}

/// Per-step kernel parameters.
#[derive(Clone, Debug)]
pub struct KernelPair {
    /// `Q^x_t`.
    pub gain_x: Matrix,
    /// `y_t`.
    pub y: Vector,
    /// `ȳ_t`, weighted mean of `G_t(x_{t−1})`.
    pub ybar: Vector,
    /// `N(0, Σ^K_t)`.
    pub forward_noise: GaussianDist,
    /// `q̂_{t−1} = N(ξ_{t−1}, Σ^q_{t−1})`.
    pub q_hat: GaussianDist,
    /// `L̂_{t−1}(·|x_t)`.
    pub backward: AffineGaussian,
}

impl KernelPair {
    /// `T_t(x_prev)` given `z_prev = G_t(x_prev)`.
    pub fn forward_mean(&self, x_prev: &Vector, z_prev: &Vector) -> Vector {
        x_prev + &self.gain_x * (&self.y - z_prev)
    }

    /// `log K_t(x_new | x_prev)`.
    pub fn log_forward(&self, x_prev: &Vector, z_prev: &Vector, x_new: &Vector) -> f64 {
        self.forward_noise
            .logpdf_residual(&(x_new - self.forward_mean(x_prev, z_prev)))
    }

    /// `log L̂_{t−1}(x_prev | x_new)`.
    pub fn log_backward(&self, x_prev: &Vector, x_new: &Vector) -> f64 {
        self.backward.log_density(x_prev, x_new)
    }

    pub fn sigma_k(&self) -> &Matrix {
        self.forward_noise.cov()
    }

    pub fn sigma_q(&self) -> &Matrix {
        self.q_hat.cov()
    }

    pub fn sigma_l(&self) -> &Matrix {
        self.backward.cov()
    }

    /// Replaces `L̂` (used by the linear-Gaussian oracle).
    pub fn with_backward(mut self, backward: AffineGaussian) -> Self {
        self.backward = backward;
        self
    }
}

/// Builds `K_t` and `L̂_{t−1}` from the gain of the weighted ensemble.
///
/// `ξ`, `Σ^q` and `ȳ` are the parameter and prediction blocks of the
/// gain's prior moments, so they carry the same weights.
pub fn build_forward_kernel(gain: &GainBundle, y: &Vector, r: &Matrix, delta: f64) -> Result<KernelPair> {
    let n_x = gain.param_dim();
    let xi = gain.param_mean();
    let sigma_q = gain.param_cov();
    let ybar = gain.predicted_mean();
    let qx = &gain.gain_x;

    let sigma_k = symmetrize(&(qx * r * qx.transpose() + &sigma_q * (delta * delta)));
    let q_hat = GaussianDist::new(xi.clone(), sigma_q.clone())?;
    let forward_noise = GaussianDist::centered(sigma_k.clone())?;

    // S = Σ^q + Σ^K; X·S⁻¹ = (S⁻¹·Xᵀ)ᵀ because S is symmetric
    let s = symmetrize(&(&sigma_q + &sigma_k));
    let eye = Matrix::identity(n_x, n_x);
    let k_sinv = solve_spd(&s, &sigma_k)?.transpose();
    let q_sinv = solve_spd(&s, &sigma_q)?.transpose();
    let coef_new = &eye - &k_sinv;
    let coef_xi = &eye - &q_sinv;
    let shift = qx * (y - &ybar);
    let offset = &coef_xi * &xi - &coef_new * &shift;
    // Σ^q − Σ^q S⁻¹ Σ^q, evaluated as Σ^K S⁻¹ Σ^q to avoid cancellation
    let sigma_l = symmetrize(&(&k_sinv * &sigma_q));
    let backward = AffineGaussian {
        coef: coef_new,
        offset,
        noise: GaussianDist::centered(sigma_l)?,
    };
    Ok(KernelPair {
        gain_x: qx.clone(),
        y: y.clone(),
        ybar,
        forward_noise,
        q_hat,
        backward,
    })
}

/// `x_t^m = T_t(x_{t−1}^m) + ε^m`, `ε^m ~ N(0, Σ^K)` from the particle's stream.
///
/// `zs` holds `G_t(x_{t−1}^m)` already computed for the gain.
pub fn sample_forward(
    kernel: &KernelPair,
    xs: &[Vector],
    zs: &[Vector],
    seed: u64,
    t: usize,
    stream_ids: &[u64],
    exec: Execution,
) -> Vec<Vector> {
    map_indexed(xs.len(), exec, |m| {
        let mut rng = stream(seed, Purpose::Forward, t, stream_ids[m]);
        kernel.forward_mean(&xs[m], &zs[m]) + kernel.forward_noise.sample_centered(&mut rng)
    })
}

/// `log α_t = log π_t(x_new) − log π_{t−1}(x_prev) + log L̂ − log K`.
pub fn incremental_log_weight(
    kernel: &KernelPair,
    x_prev: &Vector,
    z_prev: &Vector,
    x_new: &Vector,
    logpost_new: f64,
    logpost_prev: f64,
) -> f64 {
    if logpost_new == f64::NEG_INFINITY || logpost_prev == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    logpost_new - logpost_prev + kernel.log_backward(x_prev, x_new) - kernel.log_forward(x_prev, z_prev, x_new)
}

/// Approximate incremental weight with `π_{t−1}` replaced by `q̂_{t−1}`;
/// needs only the current-step likelihood.
pub fn approx_incremental_log_weight(
    kernel: &KernelPair,
    x_prev: &Vector,
    z_prev: &Vector,
    x_new: &Vector,
    loglik_y_t: f64,
) -> f64 {
    if loglik_y_t == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    kernel.q_hat.logpdf(x_new) - kernel.q_hat.logpdf(x_prev) + loglik_y_t + kernel.log_backward(x_prev, x_new)
        - kernel.log_forward(x_prev, z_prev, x_new)
}

/// One particle's path since the last exact-weight step `t₀`.
#[derive(Clone, Debug)]
pub struct ParticleHistory {
    pub start: usize,
    /// Normalized `log w_{t₀}`.
    pub log_weight_start: f64,
    /// `log π_{t₀}(x_{t₀})`.
    pub logpost_start: f64,
    /// `x_{t₀}, …, x_t`.
    pub path: Vec<Vector>,
    /// `G_{i+1}(x_i)` used by each forward kernel.
    pub predictions: Vec<Vector>,
    /// `log L̂_i(x_i | x_{i+1})`.
    pub log_backward: Vec<f64>,
    /// `log K_{i+1}(x_{i+1} | x_i)`.
    pub log_forward: Vec<f64>,
}

impl ParticleHistory {
    pub fn new(start: usize, x: Vector, log_weight_start: f64, logpost_start: f64) -> Self {
        Self {
            start,
            log_weight_start,
            logpost_start,
            path: vec![x],
            predictions: Vec::new(),
            log_backward: Vec::new(),
            log_forward: Vec::new(),
        }
    }

    pub fn push(&mut self, prediction: Vector, x_new: Vector, log_backward: f64, log_forward: f64) {
        self.predictions.push(prediction);
        self.path.push(x_new);
        self.log_backward.push(log_backward);
        self.log_forward.push(log_forward);
    }

    pub fn len(&self) -> usize {
        self.log_forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_forward.is_empty()
    }

    pub fn current(&self) -> &Vector {
        self.path.last().expect("path holds x_t0")
    }

    /// `Σ_i log L̂_i − log K_{i+1}`.
    pub fn kernel_log_ratio(&self) -> f64 {
        self.log_backward.iter().zip(&self.log_forward).map(|(b, f)| b - f).sum()
    }
}

/// `log w_t = log w_{t₀} + log π_t(x_t) − log π_{t₀}(x_{t₀}) + Σ (log L̂_i − log K_{i+1})`.
pub fn refined_log_weight(history: &ParticleHistory, logpost_t: f64) -> f64 {
    if history.log_weight_start == f64::NEG_INFINITY
        || history.logpost_start == f64::NEG_INFINITY
        || logpost_t == f64::NEG_INFINITY
    {
        return f64::NEG_INFINITY;
    }
    history.log_weight_start + logpost_t - history.logpost_start + history.kernel_log_ratio()
}
