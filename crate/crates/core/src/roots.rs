//! Monotone function inversion: exponential bracketing, bisection,
//! Newton polish.
//!
//! All the inverses needed here (Φ⁻¹, Ψ⁻¹) invert strictly decreasing
//! maps with analytically available derivatives, so the scheme is
//! bracket → bisect to 1e-6 → Newton to 1e-12 relative.

use crate::error::{Error, Result};

pub const BISECT_TOL: f64 = 1e-6;
pub const POLISH_TOL: f64 = 1e-12;

/// Invert a strictly decreasing map: find x > 0 with f(x) = target.
///
/// `hint` seeds the exponential bracket search. `df` is the derivative
/// of `f` (negative everywhere). Evaluations of `f` may fail (e.g.
/// quadrature-backed maps), so `f` is fallible.
pub fn invert_decreasing<F, D>(f: F, df: D, target: f64, hint: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
    D: Fn(f64) -> f64,
{
    assert!(target.is_finite());
    let mut lo = hint.max(1e-300);
    let mut f_lo = f(lo)?;

    // walk left while f(lo) < target (decreasing f: smaller x, bigger f)
    let mut steps = 0;
    while f_lo < target {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::OutOfRange(format!(
                "target {target:.6e} above the range of the decreasing map"
            )));
        }
        f_lo = f(lo)?;
        steps += 1;
        if steps > 2100 {
            return Err(Error::OutOfRange("bracket search exhausted (left)".into()));
        }
    }

    let mut hi = lo;
    let mut f_hi = f_lo;
    steps = 0;
    while f_hi > target {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::OutOfRange(format!(
                "target {target:.6e} below the range of the decreasing map"
            )));
        }
        f_hi = f(hi)?;
        steps += 1;
        if steps > 2100 {
            return Err(Error::OutOfRange("bracket search exhausted (right)".into()));
        }
    }
    if f_lo == target {
        return Ok(lo);
    }
    if f_hi == target {
        return Ok(hi);
    }

    // bisect to coarse relative accuracy
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo) <= BISECT_TOL * mid.abs() {
            break;
        }
        let f_mid = f(mid)?;
        if f_mid > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Newton polish, guarded by the bracket
    let mut x = 0.5 * (lo + hi);
    for _ in 0..60 {
        let fx = f(x)?;
        if fx > target {
            lo = x;
        } else {
            hi = x;
        }
        let d = df(x);
        let mut next = if d != 0.0 && d.is_finite() { x - (fx - target) / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let done = (next - x).abs() <= POLISH_TOL * x.abs().max(POLISH_TOL);
        x = next;
        if done {
            break;
        }
    }
    Ok(x)
}
