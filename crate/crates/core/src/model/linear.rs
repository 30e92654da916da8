//! Linear-Gaussian model `G_t(x) = A_t·x` with a conjugate posterior.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gaussmath::{solve_spd, symmetrize, GaussianDist, Matrix, Vector};
use crate::rng::{stream, Purpose};

use super::{check_range, ForwardModel, ObservationRecord, PriorSpec};

#[derive(Clone, Debug)]
pub struct LinearGaussian {
    maps: Vec<Matrix>,
    noise: GaussianDist,
    prior: PriorSpec,
}

impl LinearGaussian {
    pub fn new(maps: Vec<Matrix>, noise_cov: Matrix, prior: GaussianDist) -> Result<Self> {
        let Some(first) = maps.first() else {
            return Err(Error::Config("linear model needs at least one step".into()));
        };
        let (n_y, n_x) = first.shape();
        if maps.iter().any(|a| a.shape() != (n_y, n_x)) {
            return Err(Error::Config("all observation matrices must share one shape".into()));
        }
        if noise_cov.nrows() != n_y || prior.dim() != n_x {
            return Err(Error::Config("noise or prior dimension does not match the observation matrices".into()));
        }
        Ok(Self {
            maps,
            noise: GaussianDist::centered(noise_cov)?,
            prior: PriorSpec::Gaussian(prior),
        })
    }

    /// Standard-normal `A_t` drawn from `matrix_seed`, `R = noise_std²·I`.
    pub fn random(n_x: usize, n_y: usize, steps: usize, noise_std: f64, prior: GaussianDist, matrix_seed: u64) -> Result<Self> {
        let maps = (1..=steps)
            .map(|t| {
                let mut rng = stream(matrix_seed, Purpose::Data, t, u64::MAX);
                Matrix::from_fn(n_y, n_x, |_, _| rng.sample::<f64, _>(StandardNormal))
            })
            .collect();
        Self::new(maps, Matrix::identity(n_y, n_y) * (noise_std * noise_std), prior)
    }

    pub fn map(&self, t: usize) -> &Matrix {
        &self.maps[t - 1]
    }

    fn prior_gaussian(&self) -> &GaussianDist {
        match &self.prior {
            PriorSpec::Gaussian(g) => g,
            PriorSpec::UniformBox { .. } => unreachable!("linear model prior is always Gaussian"),
        }
    }

    /// Exact posteriors `π_1, …, π_T` by the conjugate Kalman recursion.
    pub fn exact_posteriors(&self, data: &[ObservationRecord]) -> Result<Vec<GaussianDist>> {
        let prior = self.prior_gaussian();
        let mut mean = prior.mean().clone();
        let mut cov = prior.cov().clone();
        let r = self.noise.cov();
        let mut out = Vec::with_capacity(data.len());
        for rec in data {
            let a = self.map(rec.t);
            let pa_t = &cov * a.transpose();
            let innovation = a * &pa_t + r;
            // gainᵀ = S⁻¹ (A P)
            let gain_t = solve_spd(&innovation, &pa_t.transpose())?;
            mean += gain_t.transpose() * (&rec.y - a * &mean);
            cov = symmetrize(&(&cov - gain_t.transpose() * &pa_t.transpose()));
            out.push(GaussianDist::new(mean.clone(), cov.clone())?);
        }
        Ok(out)
    }
}

impl ForwardModel for LinearGaussian {
    fn name(&self) -> &str {
        "linear"
    }

    fn param_dim(&self) -> usize {
        self.maps[0].ncols()
    }

    fn obs_dim(&self) -> usize {
        self.maps[0].nrows()
    }

    fn steps(&self) -> usize {
        self.maps.len()
    }

    fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    fn noise(&self, _t: usize) -> &GaussianDist {
        &self.noise
    }

    fn predict_range(&self, x: &Vector, first: usize, last: usize) -> Result<Vec<Vector>> {
        check_range(first, last, self.maps.len())?;
        Ok((first..=last).map(|t| self.map(t) * x).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_conjugate_update() {
        let prior = GaussianDist::new(Vector::zeros(1), Matrix::identity(1, 1)).unwrap();
        let m = LinearGaussian::new(vec![Matrix::identity(1, 1)], Matrix::identity(1, 1), prior).unwrap();
        let data = vec![ObservationRecord {
            t: 1,
            y: Vector::from_element(1, 1.0),
        }];
        let post = m.exact_posteriors(&data).unwrap();
        assert!((post[0].mean()[0] - 0.5).abs() < 1e-15);
        assert!((post[0].cov()[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn batch_and_recursive_posteriors_agree() {
        let prior = GaussianDist::new(Vector::from_vec(vec![0.5, -1.0]), Matrix::identity(2, 2) * 2.0).unwrap();
        let m = LinearGaussian::random(2, 1, 4, 0.5, prior.clone(), 3).unwrap();
        let data = crate::model::simulate_observations(&m, &Vector::from_vec(vec![1.0, 2.0]), 9).unwrap();
        let post = m.exact_posteriors(&data).unwrap();
        // information form over all four observations at once
        let r_inv = 1.0 / 0.25;
        let mut info = prior.cov().clone().try_inverse().unwrap();
        let mut shift = &info * prior.mean();
        for rec in &data {
            let a = m.map(rec.t);
            info += a.transpose() * a * r_inv;
            shift += a.transpose() * &rec.y * r_inv;
        }
        let cov = info.try_inverse().unwrap();
        let mean = &cov * shift;
        assert!((post[3].mean() - mean).amax() < 1e-12);
        assert!((post[3].cov() - cov).amax() < 1e-12);
    }
}
