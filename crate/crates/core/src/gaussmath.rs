//! Dense linear algebra and multivariate-normal primitives.
//!
//! Matrices are `nalgebra` dynamic matrices. Every covariance is symmetrized
//! as `(A + Aᵀ)/2` when a [`GaussianDist`] is built, and factorizations go
//! through [`cholesky`], which applies a bounded diagonal jitter when the
//! plain factorization fails (ensemble covariances are often rank deficient).

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Matrix = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;

/// First jitter tried, relative to `trace(A)/d`.
pub const JITTER_START: f64 = 1e-12;
/// Largest jitter tried before giving up, relative to `trace(A)/d`.
pub const JITTER_MAX: f64 = 1e-6;
/// Relative asymmetry accepted by [`cholesky`].
pub const SYMMETRY_TOL: f64 = 1e-10;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// `(A + Aᵀ)/2`.
pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

fn relative_asymmetry(a: &Matrix) -> f64 {
    let scale = a.amax();
    if scale == 0.0 {
        return 0.0;
    }
    (a - a.transpose()).amax() / scale
}

/// Lower-triangular factor `L` with `L·Lᵀ = A + jitter·I`.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    lower: Matrix,
    jitter: f64,
}

impl CholeskyFactor {
    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    /// Absolute diagonal shift that was needed (0 when none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// `log det(A + jitter·I)` from the factor diagonal.
    pub fn log_det(&self) -> f64 {
        2.0 * self.lower.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Solves `L·y = b`.
    pub fn solve_lower(&self, b: &Vector) -> Vector {
        self.lower
            .solve_lower_triangular(b)
            .expect("cholesky factor has a positive diagonal")
    }

    /// Solves `(L·Lᵀ)·X = B` with two triangular solves.
    pub fn solve(&self, b: &Matrix) -> Matrix {
        let y = self
            .lower
            .solve_lower_triangular(b)
            .expect("cholesky factor has a positive diagonal");
        self.lower
            .tr_solve_lower_triangular(&y)
            .expect("cholesky factor has a positive diagonal")
    }
}

fn try_factor(a: &Matrix) -> Option<Matrix> {
    nalgebra::Cholesky::new(a.clone()).map(|c| c.unpack())
}

/// Cholesky factorization with jitter escalation.
///
/// On failure the diagonal is shifted by `1e-12·trace(A)/d`, escalating by
/// ×10 up to `1e-6·trace(A)/d`.
pub fn cholesky_factor(cov: &Matrix) -> Result<CholeskyFactor> {
    let d = cov.nrows();
    if d != cov.ncols() {
        return Err(Error::Dimension(format!(
            "cholesky of a {}x{} matrix",
            cov.nrows(),
            cov.ncols()
        )));
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite { dim: d });
    }
    let asym = relative_asymmetry(cov);
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    if let Some(lower) = try_factor(cov) {
        return Ok(CholeskyFactor { lower, jitter: 0.0 });
    }
    let scale = cov.trace() / d as f64;
    if !(scale > 0.0) {
        return Err(Error::NotPositiveDefinite { dim: d });
    }
    let mut rel = JITTER_START;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = rel * scale;
        let mut shifted = cov.clone();
        for i in 0..d {
            shifted[(i, i)] += jitter;
        }
        if let Some(lower) = try_factor(&shifted) {
            return Ok(CholeskyFactor { lower, jitter });
        }
        rel *= 10.0;
    }
    Err(Error::NotPositiveDefinite { dim: d })
}

/// Lower-triangular Cholesky factor of `cov` (see [`cholesky_factor`]).
pub fn cholesky(cov: &Matrix) -> Result<Matrix> {
    cholesky_factor(cov).map(|f| f.lower)
}

/// Solves `A·X = B` for symmetric positive definite `A` without forming `A⁻¹`.
pub fn solve_spd(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "solve with {}x{} system and {} right-hand rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    Ok(cholesky_factor(a)?.solve(b))
}

/// Weighted mean and covariance of `points`.
///
/// With `weights == None` this is the plain `1/M`, `1/(M−1)` estimator.
/// Normalized weights use the reliability-weights correction
/// `Σ w (p−μ)(p−μ)ᵀ / (1 − Σ w²)`, which reduces to the former when uniform.
pub fn weighted_mean_cov(points: &[Vector], weights: Option<&[f64]>) -> Result<(Vector, Matrix)> {
    let m = points.len();
    if m == 0 {
        return Err(Error::DegenerateEnsemble { ess: 0.0 });
    }
    let d = points[0].len();
    match weights {
        None => {
            if m < 2 {
                return Err(Error::DegenerateEnsemble { ess: m as f64 });
            }
            let mut mean = Vector::zeros(d);
            for p in points {
                mean += p;
            }
            mean /= m as f64;
            let mut cov = Matrix::zeros(d, d);
            for p in points {
                let dev = p - &mean;
                cov.ger(1.0, &dev, &dev, 1.0);
            }
            cov /= (m - 1) as f64;
            Ok((mean, symmetrize(&cov)))
        }
        Some(w) => {
            if w.len() != m {
                return Err(Error::Dimension(format!(
                    "{} weights for {} points",
                    w.len(),
                    m
                )));
            }
            let sum_sq: f64 = w.iter().map(|v| v * v).sum();
            let ess = if sum_sq > 0.0 { 1.0 / sum_sq } else { 0.0 };
            if !(ess >= 2.0) {
                return Err(Error::DegenerateEnsemble { ess });
            }
            let mut mean = Vector::zeros(d);
            for (p, &wi) in points.iter().zip(w) {
                if wi > 0.0 {
                    mean.axpy(wi, p, 1.0);
                }
            }
            let mut cov = Matrix::zeros(d, d);
            for (p, &wi) in points.iter().zip(w) {
                if wi > 0.0 {
                    let dev = p - &mean;
                    cov.ger(wi, &dev, &dev, 1.0);
                }
            }
            cov /= 1.0 - sum_sq;
            Ok((mean, symmetrize(&cov)))
        }
    }
}

/// Multivariate normal `N(mean, cov)` with its Cholesky factor cached.
#[derive(Clone, Debug)]
pub struct GaussianDist {
    mean: Vector,
    cov: Matrix,
    factor: CholeskyFactor,
    log_norm: f64,
}

impl GaussianDist {
    pub fn new(mean: Vector, cov: Matrix) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::Dimension(format!(
                "mean of length {} with {}x{} covariance",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        let cov = symmetrize(&cov);
        let factor = cholesky_factor(&cov)?;
        let log_norm = -0.5 * (mean.len() as f64 * LN_2PI + factor.log_det());
        Ok(Self {
            mean,
            cov,
            factor,
            log_norm,
        })
    }

    /// Zero-mean distribution, used for noise terms.
    pub fn centered(cov: Matrix) -> Result<Self> {
        Self::new(Vector::zeros(cov.nrows()), cov)
    }

    /// Independent coordinates with the given standard deviations.
    pub fn diagonal(mean: Vector, std: &[f64]) -> Result<Self> {
        let var = Vector::from_iterator(std.len(), std.iter().map(|s| s * s));
        Self::new(mean, Matrix::from_diagonal(&var))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix {
        &self.cov
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    /// `mean + L·z` with `z` standard normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        &self.mean + self.sample_centered(rng)
    }

    /// `L·z`, i.e. a draw from `N(0, cov)`.
    pub fn sample_centered<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let z = Vector::from_iterator(self.dim(), (0..self.dim()).map(|_| rng.sample(StandardNormal)));
        self.factor.lower() * z
    }

    pub fn logpdf(&self, x: &Vector) -> f64 {
        self.logpdf_residual(&(x - &self.mean))
    }

    /// Log density of `N(0, cov)` at `r`, i.e. `logpdf(mean + r)`.
    pub fn logpdf_residual(&self, r: &Vector) -> f64 {
        let y = self.factor.solve_lower(r);
        self.log_norm - 0.5 * y.norm_squared()
    }
}

/// `log Σ exp(v)`, returning `-∞` for an empty or all `-∞` input.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = stream(seed, Purpose::Data, 0, 0);
        Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    fn random_spd(d: usize, seed: u64) -> Matrix {
        let b = random_matrix(d, d, seed);
        &b * b.transpose() + Matrix::identity(d, d) * 0.1
    }

    #[test]
    fn cholesky_identity_and_diagonal() {
        let l = cholesky(&Matrix::identity(3, 3)).unwrap();
        assert_eq!(l, Matrix::identity(3, 3));
        let l = cholesky(&Matrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0])).unwrap();
        assert_eq!(l, Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]));
    }

    #[test]
    fn cholesky_reconstructs_random_spd() {
        for seed in 0..5 {
            let a = random_spd(4, seed);
            let l = cholesky(&a).unwrap();
            for i in 0..4 {
                for j in (i + 1)..4 {
                    assert_eq!(l[(i, j)], 0.0);
                }
            }
            let err = (&l * l.transpose() - &a).norm() / a.norm();
            assert!(err < 1e-10, "reconstruction error {err}");
        }
    }

    #[test]
    fn cholesky_jitters_rank_deficient_matrix() {
        let v = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        let a = &v * v.transpose();
        let f = cholesky_factor(&a).unwrap();
        let scale = a.trace() / 3.0;
        assert!(f.jitter() >= JITTER_START * scale);
        assert!(f.jitter() <= JITTER_MAX * scale * 1.000001);
        let target = &a + Matrix::identity(3, 3) * f.jitter();
        let err = (f.lower() * f.lower().transpose() - &target).norm() / target.norm();
        assert!(err < 1e-8);
    }

    #[test]
    fn cholesky_rejects_indefinite_and_non_square() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(cholesky(&a), Err(Error::NotPositiveDefinite { dim: 2 })));
        assert!(matches!(cholesky(&Matrix::zeros(2, 3)), Err(Error::Dimension(_))));
        let asym = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(cholesky(&asym), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn solve_spd_identity_scaling_and_residual() {
        let b = random_matrix(3, 2, 7);
        assert_eq!(solve_spd(&Matrix::identity(3, 3), &b).unwrap(), b);
        let x = solve_spd(&(Matrix::identity(3, 3) * 2.0), &Matrix::identity(3, 3)).unwrap();
        assert!((x - Matrix::identity(3, 3) * 0.5).amax() < 1e-15);
        for seed in 0..5 {
            let a = random_spd(5, seed + 10);
            let b = random_matrix(5, 3, seed + 20);
            let x = solve_spd(&a, &b).unwrap();
            assert!((&a * &x - &b).norm() / b.norm() < 1e-10);
        }
    }

    #[test]
    fn solve_spd_matches_two_triangular_solves() {
        let a = random_spd(4, 3);
        let b = random_matrix(4, 2, 4);
        let l = cholesky(&a).unwrap();
        let y = l.solve_lower_triangular(&b).unwrap();
        let manual = l.transpose().solve_upper_triangular(&y).unwrap();
        let x = solve_spd(&a, &b).unwrap();
        assert!((x - manual).amax() < 1e-13);
    }

    #[test]
    fn logpdf_reference_values() {
        let std = GaussianDist::new(Vector::zeros(1), Matrix::identity(1, 1)).unwrap();
        assert!((std.logpdf(&Vector::zeros(1)) + 0.918_938_533_204_672_7).abs() < 1e-12);
        let wide = GaussianDist::new(Vector::zeros(1), Matrix::from_element(1, 1, 4.0)).unwrap();
        let direct = -0.5 - 0.5 * (8.0 * std::f64::consts::PI).ln();
        assert!((wide.logpdf(&Vector::from_element(1, 2.0)) - direct).abs() < 1e-12);
        assert!((direct + 2.112_086).abs() < 1e-6);
    }

    #[test]
    fn logpdf_symmetric_about_mean() {
        let mean = Vector::from_vec(vec![1.0, -2.0, 0.5]);
        let dist = GaussianDist::new(mean.clone(), random_spd(3, 5)).unwrap();
        let v = Vector::from_vec(vec![0.3, 0.7, -1.1]);
        assert!((dist.logpdf(&(&mean + &v)) - dist.logpdf(&(&mean - &v))).abs() < 1e-12);
    }

    #[test]
    fn logpdf_matches_dense_formula() {
        let a = random_spd(3, 9);
        let mean = Vector::from_vec(vec![0.1, 0.2, 0.3]);
        let dist = GaussianDist::new(mean.clone(), a.clone()).unwrap();
        let x = Vector::from_vec(vec![1.0, -1.0, 2.0]);
        let inv = a.clone().try_inverse().unwrap();
        let dev = &x - &mean;
        let quad = (dev.transpose() * inv * &dev)[(0, 0)];
        let expected = -0.5 * quad - 0.5 * (3.0 * LN_2PI + a.determinant().ln());
        assert!((dist.logpdf(&x) - expected).abs() < 1e-10);
    }

    #[test]
    fn logpdf_integrates_to_one() {
        let sigma = 1.7;
        let dist = GaussianDist::new(Vector::from_element(1, 0.4), Matrix::from_element(1, 1, sigma * sigma)).unwrap();
        let (lo, hi, n) = (0.4 - 8.0 * sigma, 0.4 + 8.0 * sigma, 20_000);
        let h = (hi - lo) / n as f64;
        let f = |x: f64| dist.logpdf(&Vector::from_element(1, x)).exp();
        let mut total = 0.5 * (f(lo) + f(hi));
        for i in 1..n {
            total += f(lo + i as f64 * h);
        }
        assert!((total * h - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sample_degenerate_and_moments() {
        let mean = Vector::from_vec(vec![3.0, -1.0]);
        let tiny = GaussianDist::new(mean.clone(), Matrix::identity(2, 2) * 1e-30).unwrap();
        let mut rng = stream(1, Purpose::Data, 0, 0);
        assert!((tiny.sample(&mut rng) - &mean).amax() < 1e-12);

        let dist = GaussianDist::new(Vector::zeros(2), Matrix::identity(2, 2)).unwrap();
        let n = 100_000;
        let mut acc = Vector::zeros(2);
        for _ in 0..n {
            acc += dist.sample(&mut rng);
        }
        acc /= n as f64;
        assert!(acc.amax() < 0.02, "sample mean {acc}");
    }

    #[test]
    fn sampling_is_deterministic_per_stream() {
        let dist = GaussianDist::new(Vector::zeros(3), random_spd(3, 2)).unwrap();
        let draw = |s| {
            let mut rng = stream(42, Purpose::Forward, 3, s);
            (0..5).map(|_| dist.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));
    }

    #[test]
    fn covariance_symmetrized_at_construction() {
        let mut a = random_spd(3, 11);
        a[(0, 1)] += 1e-12;
        let dist = GaussianDist::new(Vector::zeros(3), a).unwrap();
        assert_eq!(dist.cov(), &dist.cov().transpose());
    }

    #[test]
    fn weighted_moments_uniform_and_degenerate() {
        let pts = vec![Vector::from_vec(vec![0.0, 0.0]), Vector::from_vec(vec![2.0, 0.0])];
        let (m, c) = weighted_mean_cov(&pts, None).unwrap();
        assert_eq!(m, Vector::from_vec(vec![1.0, 0.0]));
        assert_eq!(c, Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]));
        let (m2, c2) = weighted_mean_cov(&pts, Some(&[0.5, 0.5])).unwrap();
        assert!((m2 - m).amax() < 1e-15 && (c2 - c).amax() < 1e-15);
        assert!(matches!(
            weighted_mean_cov(&pts, Some(&[1.0, 0.0])),
            Err(Error::DegenerateEnsemble { .. })
        ));
    }

    #[test]
    fn logsumexp_stable() {
        assert_eq!(logsumexp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = logsumexp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
