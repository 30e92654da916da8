//! Kinetic model of the RKIP-regulated ERK pathway, `dx/dτ = S·V(x)`.

use crate::error::{Error, Result};
use crate::gaussmath::{GaussianDist, Vector};

use super::ode::rk4_trajectory;
use super::{check_range, ForwardModel, PriorSpec};

pub const N_SPECIES: usize = 11;
pub const N_REACTIONS: usize = 7;
pub const N_RATES: usize = 11;

/// Stoichiometric matrix, species × reactions.
pub const STOICHIOMETRY: [[f64; N_REACTIONS]; N_SPECIES] = [
    [-1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    [1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, -1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0],
    [0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0],
    [0.0, -1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 1.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, -1.0],
];

/// Initial concentrations `x₁..x₁₁`.
pub const INITIAL_STATE: [f64; N_SPECIES] = [66.0, 0.054, 0.019, 59.0, 0.09, 0.012, 65.0, 26.0, 175.0, 161.0, 2.18];

/// Measurement noise standard deviation per species.
pub const NOISE_STD: [f64; N_SPECIES] = [0.005, 5e-5, 2e-5, 0.035, 0.0005, 5e-6, 0.05, 0.02, 0.03, 0.003, 0.002];

/// Rate constants used to generate synthetic data.
pub const TRUE_RATES: [f64; N_RATES] = [0.5242, 0.0075, 0.6108, 0.0025, 0.0371, 0.8101, 0.0713, 0.0687, 0.96, 0.0012, 0.872];

pub const PRIOR_MEAN: [f64; N_RATES] = [0.5, 0.1, 0.62, 0.04, -0.5, 0.8, 0.0, 0.4, 0.9, 0.0, 0.9];
pub const PRIOR_STD: [f64; N_RATES] = [0.05, 0.03, 0.01, 0.04, 0.5, 0.02, 0.05, 0.3, 0.1, 0.005, 0.05];

/// Observed species (0-based: x₁, x₄, x₇, x₁₀).
pub const OBSERVED: [usize; 4] = [0, 3, 6, 9];

/// Reaction rates `v₁..v₇`.
#[inline]
pub fn reaction_rates(x: &[f64; N_SPECIES], k: &[f64; N_RATES]) -> [f64; N_REACTIONS] {
    [
        k[0] * x[0] * x[1] - k[1] * x[2],
        k[2] * x[2] * x[8] - k[3] * x[3],
        k[4] * x[3],
        k[5] * x[4] * x[6] - k[6] * x[7],
        k[7] * x[7],
        k[8] * x[5] * x[9] - k[9] * x[10],
        k[10] * x[10],
    ]
}

/// `S·v`.
#[inline]
pub fn apply_stoichiometry(v: &[f64; N_REACTIONS]) -> [f64; N_SPECIES] {
    let mut out = [0.0; N_SPECIES];
    for (row, o) in STOICHIOMETRY.iter().zip(out.iter_mut()) {
        *o = row.iter().zip(v).map(|(s, r)| s * r).sum();
    }
    out
}

/// `S·V(x)`.
#[inline]
pub fn erk_rhs(x: &[f64; N_SPECIES], k: &[f64; N_RATES]) -> [f64; N_SPECIES] {
    apply_stoichiometry(&reaction_rates(x, k))
}

#[derive(Clone, Debug)]
pub struct Erk {
    dt: f64,
    steps: usize,
    substeps: usize,
    initial_state: [f64; N_SPECIES],
    observed: Vec<usize>,
    noise: GaussianDist,
    prior: PriorSpec,
}

impl Erk {
    /// `noise_std` holds one entry per species; only observed ones enter `R`.
    pub fn new(
        dt: f64,
        steps: usize,
        substeps: usize,
        initial_state: [f64; N_SPECIES],
        observed: Vec<usize>,
        noise_std: [f64; N_SPECIES],
        prior: PriorSpec,
    ) -> Result<Self> {
        if !(dt > 0.0) || steps == 0 || substeps == 0 {
            return Err(Error::Config("erk needs dt > 0, steps >= 1, substeps >= 1".into()));
        }
        if observed.is_empty() || observed.iter().any(|&c| c >= N_SPECIES) {
            return Err(Error::Config("erk observed species must be a non-empty subset of 0..11".into()));
        }
        if prior.dim() != N_RATES {
            return Err(Error::Config("erk prior must be eleven-dimensional".into()));
        }
        let std: Vec<f64> = observed.iter().map(|&c| noise_std[c]).collect();
        if std.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("erk noise std must be positive for observed species".into()));
        }
        let noise = GaussianDist::diagonal(Vector::zeros(std.len()), &std)?;
        Ok(Self {
            dt,
            steps,
            substeps,
            initial_state,
            observed,
            noise,
            prior,
        })
    }

    /// Reference setup: 50 observations at `Δ_t = 0.001` of x₁, x₄, x₇, x₁₀.
    pub fn standard(substeps: usize) -> Result<Self> {
        let prior = PriorSpec::Gaussian(GaussianDist::diagonal(Vector::from_row_slice(&PRIOR_MEAN), &PRIOR_STD)?);
        Self::new(0.001, 50, substeps, INITIAL_STATE, OBSERVED.to_vec(), NOISE_STD, prior)
    }

    pub fn trajectory(&self, rates: &Vector, last: usize) -> Result<Vec<[f64; N_SPECIES]>> {
        let mut k = [0.0; N_RATES];
        k.copy_from_slice(rates.as_slice());
        rk4_trajectory(|s| erk_rhs(s, &k), self.initial_state, self.dt, self.substeps, last)
    }
}

impl ForwardModel for Erk {
    fn name(&self) -> &str {
        "erk"
    }

    fn param_dim(&self) -> usize {
        N_RATES
    }

    fn obs_dim(&self) -> usize {
        self.observed.len()
    }

    fn steps(&self) -> usize {
        self.steps
    }

    fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    fn noise(&self, _t: usize) -> &GaussianDist {
        &self.noise
    }

    fn predict_range(&self, x: &Vector, first: usize, last: usize) -> Result<Vec<Vector>> {
        check_range(first, last, self.steps)?;
        let traj = self.trajectory(x, last)?;
        Ok(traj[first - 1..]
            .iter()
            .map(|s| Vector::from_iterator(self.observed.len(), self.observed.iter().map(|&c| s[c])))
            .collect())
    }
}
