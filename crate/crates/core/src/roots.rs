//! Bracketing root finders and a one-dimensional maximizer.

use crate::error::{Error, Result};

pub const ARG_TOL: f64 = 1e-12;
pub const MAX_ITER: usize = 200;

/// Bisection for a sign change of `f` on `[lo, hi]`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(Error::NonConvergence(format!(
            "no sign change on [{lo}, {hi}]: f = {flo}, {fhi}"
        )));
    }
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Err(Error::NonConvergence(format!(
        "bisection stopped at [{lo}, {hi}] after {MAX_ITER} iterations"
    )))
}

/// Boundary of a monotone predicate: given `pred(lo) == false` and
/// `pred(hi) == true`, shrinks the bracket to width `tol` and returns it.
pub fn bisect_predicate<P: FnMut(f64) -> bool>(
    mut pred: P,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            return Ok((lo, hi));
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::NonConvergence(format!(
        "predicate bisection stopped at [{lo}, {hi}] after {MAX_ITER} iterations"
    )))
}

/// Doubles `hi` until `pred(hi)` holds or `limit` is passed.
pub fn expand_upper<P: FnMut(f64) -> bool>(mut pred: P, start: f64, limit: f64) -> Result<f64> {
    let mut hi = start;
    while hi <= limit {
        if pred(hi) {
            return Ok(hi);
        }
        hi *= 2.0;
    }
    Err(Error::NonConvergence(format!(
        "no bracket found below {limit}"
    )))
}

/// Golden-section search for a maximum of `f` on `[a, b]`, assuming one peak.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..MAX_ITER {
        if b - a <= tol {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt2() {
        let x = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((x - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn bisect_reports_missing_bracket() {
        assert!(matches!(
            bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12),
            Err(Error::NonConvergence(_))
        ));
    }

    #[test]
    fn predicate_boundary() {
        let (lo, hi) = bisect_predicate(|x| x > 0.3, 0.0, 1.0, 1e-13).unwrap();
        assert!(lo <= 0.3 && hi >= 0.3 && hi - lo <= 1e-13);
    }

    #[test]
    fn expand_and_golden() {
        let hi = expand_upper(|x| x > 100.0, 1.0, 1e6).unwrap();
        assert_eq!(hi, 128.0);
        assert!(expand_upper(|_| false, 1.0, 10.0).is_err());
        let (x, fx) = golden_max(|x| -(x - 0.7) * (x - 0.7), 0.0, 2.0, 1e-10);
        assert!((x - 0.7).abs() < 1e-8 && fx.abs() < 1e-15);
    }
}
