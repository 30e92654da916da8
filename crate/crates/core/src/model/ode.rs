//! Classical fixed-step fourth-order Runge–Kutta.

use crate::error::{Error, Result};

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, k: &[f64; N]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        out[i] += h * k[i];
    }
    out
}

/// One RK4 step of size `h`.
#[inline]
pub fn rk4_step<const N: usize, F>(rhs: &F, y: &[f64; N], h: f64) -> [f64; N]
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    let k1 = rhs(y);
    let k2 = rhs(&axpy(y, 0.5 * h, &k1));
    let k3 = rhs(&axpy(y, 0.5 * h, &k2));
    let k4 = rhs(&axpy(y, h, &k3));
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn check_grid(dt_obs: f64, substeps: usize) -> Result<()> {
    if substeps == 0 || !(dt_obs > 0.0) || !dt_obs.is_finite() {
        return Err(Error::Domain(format!(
            "rk4 needs dt_obs > 0 and substeps >= 1 (got {dt_obs}, {substeps})"
        )));
    }
    Ok(())
}

/// Advances `state0` by `dt_obs` using `substeps` equal RK4 steps.
pub fn integrate_fixed_rk4<const N: usize, F>(rhs: F, state0: [f64; N], dt_obs: f64, substeps: usize) -> Result<[f64; N]>
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    check_grid(dt_obs, substeps)?;
    let h = dt_obs / substeps as f64;
    let mut y = state0;
    for _ in 0..substeps {
        y = rk4_step(&rhs, &y, h);
    }
    if y.iter().all(|v| v.is_finite()) {
        Ok(y)
    } else {
        Err(Error::NonFiniteState)
    }
}

/// States at `dt_obs, 2·dt_obs, …, intervals·dt_obs`.
pub fn rk4_trajectory<const N: usize, F>(
    rhs: F,
    state0: [f64; N],
    dt_obs: f64,
    substeps: usize,
    intervals: usize,
) -> Result<Vec<[f64; N]>>
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    check_grid(dt_obs, substeps)?;
    let h = dt_obs / substeps as f64;
    let mut y = state0;
    let mut out = Vec::with_capacity(intervals);
    for _ in 0..intervals {
        for _ in 0..substeps {
            y = rk4_step(&rhs, &y, h);
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteState);
        }
        out.push(y);
    }
    Ok(out)
}
