use crate::error::{Error, Result};

/// Bisection for `f(x) = target` on a nondecreasing `f`.
///
/// Keeps the invariant `f(lo) <= target <= f(hi)` and stops once the bracket
/// is narrower than `tol`; returns the midpoint of the final bracket.
pub fn bisect<F: Fn(f64) -> f64>(f: F, target: f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let (f_lo, f_hi) = (f(lo), f(hi));
    if !(lo <= hi && f_lo <= target && target <= f_hi) {
        return Err(Error::Bracket { lo, hi, f_lo, f_hi, target });
    }
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Generalized inverse `inf { x : f(x) >= level }` of a nondecreasing,
/// right-continuous `f` on `[lo, hi]`, located by bisection to width `tol`.
///
/// Returns `lo` exactly when `f(lo) >= level`, so atoms at the left end of
/// the support are reproduced without bisection noise.
pub fn quantile<F: Fn(f64) -> f64>(f: F, level: f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if f(lo) >= level {
        return Ok(lo);
    }
    let f_hi = f(hi);
    if f_hi < level {
        return Err(Error::Bracket { lo, hi, f_lo: f(lo), f_hi, target: level });
    }
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) >= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
