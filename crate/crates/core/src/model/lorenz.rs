//! Lorenz 63 with unknown `(α, β, ρ)` and a known initial state.

use crate::error::{Error, Result};
use crate::gaussmath::{GaussianDist, Matrix, Vector};

use super::ode::rk4_trajectory;
use super::{check_range, ForwardModel, PriorSpec};

/// `(α(y−x), x(ρ−z)−y, xy−βz)`.
#[inline]
pub fn lorenz63_rhs(state: &[f64; 3], alpha: f64, rho: f64, beta: f64) -> [f64; 3] {
    let [x, y, z] = *state;
    [alpha * (y - x), x * (rho - z) - y, x * y - beta * z]
}

/// Parameters are ordered `(α, β, ρ)`; `observed` picks state components
/// (0 = x, 1 = y, 2 = z).
#[derive(Clone, Debug)]
pub struct Lorenz63 {
    dt: f64,
    steps: usize,
    substeps: usize,
    initial_state: [f64; 3],
    observed: Vec<usize>,
    noise: GaussianDist,
    prior: PriorSpec,
}

impl Lorenz63 {
    pub fn new(
        dt: f64,
        steps: usize,
        substeps: usize,
        initial_state: [f64; 3],
        observed: Vec<usize>,
        noise_std: f64,
        prior: PriorSpec,
    ) -> Result<Self> {
        if !(dt > 0.0) || steps == 0 || substeps == 0 || !(noise_std > 0.0) {
            return Err(Error::Config("lorenz63 needs dt > 0, steps >= 1, substeps >= 1, noise_std > 0".into()));
        }
        if observed.is_empty() || observed.iter().any(|&c| c > 2) {
            return Err(Error::Config("lorenz63 observed components must be a non-empty subset of {0,1,2}".into()));
        }
        if prior.dim() != 3 {
            return Err(Error::Config("lorenz63 prior must be three-dimensional".into()));
        }
        let n_y = observed.len();
        let noise = GaussianDist::centered(Matrix::identity(n_y, n_y) * (noise_std * noise_std))?;
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

    /// Full state trajectory at observation times `1..=last`.
    pub fn trajectory(&self, params: &Vector, last: usize) -> Result<Vec<[f64; 3]>> {
        let (alpha, beta, rho) = (params[0], params[1], params[2]);
        rk4_trajectory(
            |s| lorenz63_rhs(s, alpha, rho, beta),
            self.initial_state,
            self.dt,
            self.substeps,
            last,
        )
    }
}

impl ForwardModel for Lorenz63 {
    fn name(&self) -> &str {
        "lorenz63"
    }

    fn param_dim(&self) -> usize {
        3
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
