//! `dv/dτ − v = −v³`, `v(0) = x`, observed at `τ = t·Δ_t`.

use crate::error::{Error, Result};
use crate::gaussmath::{GaussianDist, Matrix, Vector};

use super::{check_range, ForwardModel, PriorSpec};

/// Closed form `x·(x² + (1 − x²)e^{−2τ})^{−1/2}`.
pub fn bernoulli_solution(x: f64, tau: f64) -> Result<f64> {
    let radicand = x * x + (1.0 - x * x) * (-2.0 * tau).exp();
    if !(radicand > 0.0) {
        return Err(Error::Domain(format!("x²+(1−x²)e^(−2τ) = {radicand} at x = {x}, τ = {tau}")));
    }
    let v = x / radicand.sqrt();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteState)
    }
}

/// Initial-condition estimation for the Bernoulli equation.
#[derive(Clone, Debug)]
pub struct Bernoulli {
    dt: f64,
    steps: usize,
    noise: GaussianDist,
    prior: PriorSpec,
}

impl Bernoulli {
    pub fn new(dt: f64, steps: usize, noise_std: f64, prior: PriorSpec) -> Result<Self> {
        if !(dt > 0.0) || steps == 0 || !(noise_std > 0.0) {
            return Err(Error::Config("bernoulli needs dt > 0, steps >= 1 and noise_std > 0".into()));
        }
        if prior.dim() != 1 {
            return Err(Error::Config("bernoulli prior must be one-dimensional".into()));
        }
        let noise = GaussianDist::centered(Matrix::from_element(1, 1, noise_std * noise_std))?;
        Ok(Self { dt, steps, noise, prior })
    }
}

impl ForwardModel for Bernoulli {
    fn name(&self) -> &str {
        "bernoulli"
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn obs_dim(&self) -> usize {
        1
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
        (first..=last)
            .map(|t| bernoulli_solution(x[0], t as f64 * self.dt).map(|v| Vector::from_element(1, v)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_points_and_initial_condition() {
        for tau in [0.0, 0.3, 5.0, 40.0] {
            assert_eq!(bernoulli_solution(0.0, tau).unwrap(), 0.0);
        }
        assert!((bernoulli_solution(1.0, 5.0).unwrap() - 1.0).abs() < 1e-15);
        for x in [-0.7, 1e-4, 2.5, 9.0] {
            assert!((bernoulli_solution(x, 0.0).unwrap() - x).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_extended_precision_value() {
        // 50-digit evaluation of the closed form at x = 1e-4, τ = 4.5.
        let reference = 0.009_001_348_489_033_314_595_323_722_111_991_497_f64;
        let v = bernoulli_solution(1e-4, 4.5).unwrap();
        assert!(((v - reference) / reference).abs() < 1e-12);
    }

    #[test]
    fn satisfies_the_ode() {
        let (x, tau, h) = (0.3, 1.1, 1e-5);
        let v = bernoulli_solution(x, tau).unwrap();
        let dv = (bernoulli_solution(x, tau + h).unwrap() - bernoulli_solution(x, tau - h).unwrap()) / (2.0 * h);
        assert!((dv - (v - v * v * v)).abs() < 1e-8);
    }

    #[test]
    fn trajectory_from_small_truth_approaches_one() {
        let prior = PriorSpec::uniform(vec![-1.0], vec![10.0]).unwrap();
        let m = Bernoulli::new(0.3, 50, 0.4, prior).unwrap();
        let preds = m.predict_range(&Vector::from_element(1, 1e-4), 1, 50).unwrap();
        assert!(preds[0][0] < 0.01);
        // 1 − v(15) ≈ e^{−30}/(2·10⁻⁸) ≈ 4.7e-6
        assert!((preds[49][0] - 1.0).abs() < 1e-5);
        assert!(preds.windows(2).all(|w| w[1][0] >= w[0][0]));
    }
}
