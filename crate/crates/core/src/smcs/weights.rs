//! Log-space weight bookkeeping and systematic resampling.

use rand::Rng;

use crate::error::{Error, Result};
use crate::gaussmath::logsumexp;

/// Shifts `log_weights` so that `logsumexp = 0`.
///
/// Fails with `DegenerateEnsemble` when every weight is zero.
pub fn normalize_log_weights(log_weights: &mut [f64]) -> Result<()> {
    for w in log_weights.iter_mut() {
        if w.is_nan() {
            *w = f64::NEG_INFINITY;
        }
    }
    let total = logsumexp(log_weights);
    if !total.is_finite() {
        return Err(Error::DegenerateEnsemble { ess: 0.0 });
    }
    for w in log_weights.iter_mut() {
        *w -= total;
    }
    Ok(())
}

/// `1 / Σ w²` for the normalized weights implied by `log_weights`.
pub fn ess(log_weights: &[f64]) -> f64 {
    let total = logsumexp(log_weights);
    if !total.is_finite() {
        return 0.0;
    }
    let doubled: Vec<f64> = log_weights.iter().map(|w| 2.0 * (w - total)).collect();
    (-logsumexp(&doubled)).exp()
}

pub fn linear_weights(log_weights: &[f64]) -> Vec<f64> {
    log_weights.iter().map(|w| w.exp()).collect()
}

/// Ancestor indices from stratified positions `(i + u)/M`, `u ∈ [0, 1)`.
pub fn systematic_ancestors(weights: &[f64], u: f64) -> Vec<usize> {
    let m = weights.len();
    let total: f64 = weights.iter().sum();
    let mut ancestors = Vec::with_capacity(m);
    let mut cumulative = weights[0] / total;
    let mut j = 0;
    for i in 0..m {
        let position = (i as f64 + u) / m as f64;
        while position >= cumulative && j + 1 < m {
            j += 1;
            cumulative += weights[j] / total;
        }
        ancestors.push(j);
    }
    ancestors
}

/// Draws the single uniform and returns systematic ancestors.
pub fn resample_indices<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> Vec<usize> {
    let u: f64 = rng.random();
    systematic_ancestors(&linear_weights(log_weights), u)
}

pub fn offspring_counts(ancestors: &[usize], m: usize) -> Vec<usize> {
    let mut counts = vec![0; m];
    for &a in ancestors {
        counts[a] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ess_reference_values() {
        let uniform = vec![-(100f64).ln(); 100];
        assert!((ess(&uniform) - 100.0).abs() < 1e-9);
        let mut one = vec![f64::NEG_INFINITY; 10];
        one[3] = 0.0;
        assert!((ess(&one) - 1.0).abs() < 1e-12);
        let w = [0.5f64.ln(), 0.25f64.ln(), 0.25f64.ln()];
        assert!((ess(&w) - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn normalization_rejects_all_zero() {
        let mut w = vec![f64::NEG_INFINITY; 4];
        assert!(matches!(normalize_log_weights(&mut w), Err(Error::DegenerateEnsemble { .. })));
    }

    #[test]
    fn uniform_weights_give_one_offspring_each() {
        let w = vec![0.1; 10];
        for u in [1e-3, 0.3, 0.999] {
            let counts = offspring_counts(&systematic_ancestors(&w, u), 10);
            assert!(counts.iter().all(|&c| c == 1), "{counts:?}");
        }
    }

    #[test]
    fn degenerate_weights_copy_one_particle() {
        let mut w = vec![0.0; 8];
        w[0] = 1.0;
        assert!(systematic_ancestors(&w, 0.7).iter().all(|&a| a == 0));
    }

    proptest! {
        #[test]
        fn offspring_within_floor_and_ceil(raw in prop::collection::vec(0.0f64..1.0, 2..60), u in 0.0f64..1.0) {
            prop_assume!(raw.iter().sum::<f64>() > 1e-6);
            let m = raw.len();
            let total: f64 = raw.iter().sum();
            let counts = offspring_counts(&systematic_ancestors(&raw, u), m);
            prop_assert_eq!(counts.iter().sum::<usize>(), m);
            for (c, w) in counts.iter().zip(&raw) {
                let expected = m as f64 * w / total;
                prop_assert!((*c as f64) >= expected.floor() - 1e-9 && (*c as f64) <= expected.ceil() + 1e-9,
                    "count {} for expected {}", c, expected);
            }
        }

        #[test]
        fn normalized_weights_sum_to_one(raw in prop::collection::vec(-50.0f64..50.0, 1..100)) {
            let mut w = raw.clone();
            normalize_log_weights(&mut w).unwrap();
            prop_assert!(logsumexp(&w).abs() < 1e-9);
            let e = ess(&w);
            prop_assert!(e >= 1.0 - 1e-9 && e <= raw.len() as f64 + 1e-9);
        }
    }
}
