//! One-dimensional root finding for monotone residuals.

use crate::error::{Error, Result};

/// Iteration cap for bisection.
pub const MAX_BISECT_ITERS: usize = 200;
const MAX_DOUBLINGS: usize = 64;

/// Smallest `k` (to within `tol`) such that `mean_loss(k) ≤ lambda`, where
/// `mean_loss` is nonincreasing in `k`.
///
/// The bracket starts at `[lo, hi]` and is widened by doubling steps until
/// `hi` is feasible and `lo` is not. The returned point is always feasible.
pub(crate) fn shortfall_root(
    lo: f64,
    hi: f64,
    lambda: f64,
    tol: f64,
    mean_loss: impl Fn(f64) -> f64,
) -> Result<f64> {
    let feasible = |k: f64| mean_loss(k) <= lambda;

    let mut hi = hi;
    let mut step = (hi - lo).max(1.0);
    let mut tries = 0;
    while !feasible(hi) {
        tries += 1;
        if tries > MAX_DOUBLINGS || !hi.is_finite() {
            return Err(Error::InfeasibleThreshold(format!(
                "mean loss stays above lambda = {lambda} on the search bracket"
            )));
        }
        hi += step;
        step *= 2.0;
    }
    let mut lo = lo.min(hi);
    let mut step = (hi - lo).max(1.0);
    let mut tries = 0;
    while feasible(lo) {
        tries += 1;
        if tries > MAX_DOUBLINGS || !lo.is_finite() {
            return Err(Error::InfeasibleThreshold(format!(
                "mean loss never exceeds lambda = {lambda}; the shortfall is unbounded below"
            )));
        }
        hi = lo;
        lo -= step;
        step *= 2.0;
    }

    for _ in 0..MAX_BISECT_ITERS {
        if hi - lo <= tol {
            break;
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Root of `k ↦ Σ p·l_ν(v − k)` over sorted atoms `(v, p)`.
///
/// The residual is piecewise linear, so once the segment between two atoms
/// holding the sign change is found the root is solved for in closed form.
pub(crate) fn expectile_root(atoms: &[(f64, f64)], nu: f64) -> f64 {
    let n = atoms.len();
    if n == 1 {
        return atoms[0].0;
    }
    let total_p: f64 = atoms.iter().map(|a| a.1).sum();
    let total_s: f64 = atoms.iter().map(|a| a.0 * a.1).sum();
    let residual = |k: f64, p_lo: f64, s_lo: f64| {
        nu * ((total_s - s_lo) - k * (total_p - p_lo)) + (1.0 - nu) * (s_lo - k * p_lo)
    };
    // (p_lo, s_lo) accumulate atoms at or below the current candidate
    let (mut p_lo, mut s_lo) = (atoms[0].1, atoms[0].0 * atoms[0].1);
    for j in 1..n {
        let (v, p) = atoms[j];
        let (p_next, s_next) = (p_lo + p, s_lo + v * p);
        if j == n - 1 || residual(v, p_next, s_next) <= 0.0 {
            let p_hi = total_p - p_lo;
            let s_hi = total_s - s_lo;
            let k = (nu * s_hi + (1.0 - nu) * s_lo) / (nu * p_hi + (1.0 - nu) * p_lo);
            return k.clamp(atoms[j - 1].0, v);
        }
        p_lo = p_next;
        s_lo = s_next;
    }
    unreachable!("loop returns on the last atom")
}
