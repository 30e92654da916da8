//! Closed-form quantities for linear-Gaussian kernels.
//!
//! If `q_{t−1} = N(m, P)` and `K_t(·|x) = N(Fx + c, Σ^K)`, then the marginal
//! `q_t` is Gaussian and the optimal backward kernel
//! `L_{t−1}(x_{t−1}|x_t) = q_{t−1}(x_{t−1}) K_t(x_t|x_{t−1}) / q_t(x_t)`
//! is the Gaussian conditional of `x_{t−1}` given `x_t`.

use crate::error::Result;
use crate::gaussmath::{solve_spd, symmetrize, GaussianDist, Matrix, Vector};

use super::kernel::{AffineGaussian, KernelPair};

/// Optimal backward kernel and the forward marginal `q_t`.
pub fn optimal_backward(
    q_prev: &GaussianDist,
    f: &Matrix,
    c: &Vector,
    sigma_k: &Matrix,
) -> Result<(AffineGaussian, GaussianDist)> {
    let m = q_prev.mean();
    let p = q_prev.cov();
    let s = symmetrize(&(f * p * f.transpose() + sigma_k));
    let q_t = GaussianDist::new(f * m + c, s.clone())?;
    // coef = P Fᵀ S⁻¹ = (S⁻¹ F P)ᵀ
    let coef = solve_spd(&s, &(f * p))?.transpose();
    let offset = m - &coef * q_t.mean();
    let cov = symmetrize(&(p - &coef * f * p));
    Ok((
        AffineGaussian {
            coef,
            offset,
            noise: GaussianDist::centered(cov)?,
        },
        q_t,
    ))
}

/// `F = I − Q^x A` and `c = Q^x y` of `K_t` when `G_t(x) = Ax`.
pub fn linear_forward(kernel: &KernelPair, a: &Matrix) -> (Matrix, Vector) {
    let n = kernel.gain_x.nrows();
    (Matrix::identity(n, n) - &kernel.gain_x * a, &kernel.gain_x * &kernel.y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enkf::kalman_gain;
    use crate::smcs::kernel::{build_forward_kernel, incremental_log_weight};
    use crate::gaussmath::weighted_mean_cov;
    use crate::rng::{stream, Purpose};
    use rand_distr::StandardNormal;
    use rand::Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = stream(seed, Purpose::Data, 0, 7);
        Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    /// Kernel built from the exact moments of `q_{t−1}` pushed through `G = A`.
    fn exact_moment_kernel(q_prev: &GaussianDist, a: &Matrix, r: &Matrix, y: &Vector, delta: f64) -> KernelPair {
        let n_x = q_prev.dim();
        let n_y = a.nrows();
        let p = q_prev.cov();
        let mut mean = Vector::zeros(n_x + n_y);
        mean.rows_mut(0, n_x).copy_from(q_prev.mean());
        mean.rows_mut(n_x, n_y).copy_from(&(a * q_prev.mean()));
        let mut cov = Matrix::zeros(n_x + n_y, n_x + n_y);
        cov.view_mut((0, 0), (n_x, n_x)).copy_from(p);
        cov.view_mut((0, n_x), (n_x, n_y)).copy_from(&(p * a.transpose()));
        cov.view_mut((n_x, 0), (n_y, n_x)).copy_from(&(a * p));
        cov.view_mut((n_x, n_x), (n_y, n_y)).copy_from(&(a * p * a.transpose()));
        let gain = kalman_gain(mean, cov, r, n_x).unwrap();
        build_forward_kernel(&gain, y, r, delta).unwrap()
    }

    fn setup() -> (GaussianDist, Matrix, Matrix, Vector) {
        let b = random_matrix(2, 2, 1);
        let p = &b * b.transpose() + Matrix::identity(2, 2) * 0.3;
        let q_prev = GaussianDist::new(Vector::from_vec(vec![0.3, -0.8]), p).unwrap();
        let a = random_matrix(2, 2, 2);
        let r = Matrix::identity(2, 2) * 0.4;
        (q_prev, a, r, Vector::from_vec(vec![1.1, -0.2]))
    }

    #[test]
    fn optimal_weights_equal_target_over_proposal() {
        let (q_prev, a, r, y) = setup();
        let kernel = exact_moment_kernel(&q_prev, &a, &r, &y, 0.05);
        let (f, c) = linear_forward(&kernel, &a);
        let (l_opt, q_t) = optimal_backward(&q_prev, &f, &c, kernel.sigma_k()).unwrap();
        let optimal = kernel.clone().with_backward(l_opt);
        // unnormalized Gaussian targets π_{t−1}, π_t
        let pi_prev = GaussianDist::new(Vector::from_vec(vec![0.1, 0.2]), Matrix::identity(2, 2) * 0.7).unwrap();
        let pi_t = GaussianDist::new(Vector::from_vec(vec![0.5, -0.1]), Matrix::identity(2, 2) * 0.2).unwrap();
        let mut rng = stream(3, Purpose::Init, 0, 0);
        for _ in 0..50 {
            let x_prev = q_prev.sample(&mut rng);
            let z_prev = &a * &x_prev;
            let x_new = kernel.forward_mean(&x_prev, &z_prev) + kernel.forward_noise.sample_centered(&mut rng);
            let (lp_new, lp_prev) = (pi_t.logpdf(&x_new) + 3.0, pi_prev.logpdf(&x_prev) - 1.0);
            let w_prev = lp_prev - q_prev.logpdf(&x_prev);
            let w = w_prev + incremental_log_weight(&optimal, &x_prev, &z_prev, &x_new, lp_new, lp_prev);
            let direct = lp_new - q_t.logpdf(&x_new);
            assert!((w - direct).abs() < 1e-8, "{w} vs {direct}");
        }
    }

    #[test]
    fn gaussian_backward_is_optimal_for_fitted_kernel() {
        let (q_prev, a, r, y) = setup();
        let xs: Vec<Vector> = (0..400).map(|i| q_prev.sample(&mut stream(4, Purpose::Init, 0, i))).collect();
        let aug: Vec<Vector> = xs
            .iter()
            .map(|x| Vector::from_iterator(4, x.iter().copied().chain((&a * x).iter().copied())))
            .collect();
        let (mean, cov) = weighted_mean_cov(&aug, None).unwrap();
        let gain = kalman_gain(mean, cov, &r, 2).unwrap();
        let kernel = build_forward_kernel(&gain, &y, &r, 1e-4).unwrap();
        // K̂: F = I, c = Q^x (y − ȳ)
        let shift = &kernel.gain_x * (&kernel.y - &kernel.ybar);
        let (l_opt, _) = optimal_backward(&kernel.q_hat, &Matrix::identity(2, 2), &shift, kernel.sigma_k()).unwrap();
        assert!((&l_opt.coef - &kernel.backward.coef).amax() < 1e-8);
        assert!((&l_opt.offset - &kernel.backward.offset).amax() < 1e-8);
        assert!((l_opt.cov() - kernel.sigma_l()).amax() < 1e-8);
    }

    #[test]
    fn approximate_weight_differs_by_fit_ratio() {
        let (q_prev, a, r, y) = setup();
        let kernel = exact_moment_kernel(&q_prev, &a, &r, &y, 1e-4);
        let pi_prev = GaussianDist::new(Vector::from_vec(vec![0.2, 0.0]), Matrix::identity(2, 2) * 1.3).unwrap();
        let lik = GaussianDist::new(y.clone(), r.clone()).unwrap();
        let mut rng = stream(5, Purpose::Init, 0, 0);
        for _ in 0..50 {
            let x_prev = q_prev.sample(&mut rng);
            let z_prev = &a * &x_prev;
            let x_new = kernel.forward_mean(&x_prev, &z_prev) + kernel.forward_noise.sample_centered(&mut rng);
            let loglik = lik.logpdf(&(&a * &x_new));
            let lp_prev = pi_prev.logpdf(&x_prev);
            let lp_new = pi_prev.logpdf(&x_new) + loglik;
            let exact = incremental_log_weight(&kernel, &x_prev, &z_prev, &x_new, lp_new, lp_prev);
            let approx = super::super::kernel::approx_incremental_log_weight(&kernel, &x_prev, &z_prev, &x_new, loglik);
            let fit_ratio = (kernel.q_hat.logpdf(&x_new) - pi_prev.logpdf(&x_new))
                - (kernel.q_hat.logpdf(&x_prev) - pi_prev.logpdf(&x_prev));
            assert!((approx - exact - fit_ratio).abs() < 1e-10);

            // with π_{t−1} = q̂_{t−1} the two weights coincide
            let lp_prev = q_prev.logpdf(&x_prev);
            let lp_new = q_prev.logpdf(&x_new) + loglik;
            let exact = incremental_log_weight(&kernel, &x_prev, &z_prev, &x_new, lp_new, lp_prev);
            assert!((approx - exact).abs() < 1e-6);
        }
    }
}
