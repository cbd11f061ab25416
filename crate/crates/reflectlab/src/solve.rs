//! Scalar root-finding and line-search helpers used throughout the crate.

use crate::error::{Error, Result};

/// Bisection on `[a, b]`; requires a sign change. Returns the midpoint once the
/// bracket is below `xtol`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, xtol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (a, b);
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo * fhi > 0.0 {
        return Err(Error::NotBracketed(format!(
            "f({a}) = {flo:e}, f({b}) = {fhi:e}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 || (hi - lo).abs() < xtol {
            return Ok(mid);
        }
        if fm * flo > 0.0 {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bisection refined by Newton steps using a supplied derivative. Newton is
/// only accepted while it stays inside the current bracket.
pub fn bisect_newton<F, D>(mut f: F, mut df: D, a: f64, b: f64, xtol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
    D: FnMut(f64) -> f64,
{
    let mut x = bisect(&mut f, a, b, (b - a).abs() * 1e-6)?;
    for _ in 0..60 {
        let fx = f(x);
        let d = df(x);
        if d == 0.0 {
            break;
        }
        let step = fx / d;
        let xn = x - step;
        if !(a.min(b)..=a.max(b)).contains(&xn) {
            break;
        }
        x = xn;
        if step.abs() < xtol {
            break;
        }
    }
    Ok(x)
}

/// Golden-section maximization of `f` on `[a, b]`. Returns `(x, f(x))`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, xtol: f64) -> (f64, f64) {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (hi - lo).abs() > xtol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    let fx = f(x);
    (x, fx)
}

/// Scans `[a, b]` with `n` uniform samples and returns the first subinterval
/// over which `f` changes sign, skipping an initial stretch where `skip` holds.
pub fn first_sign_change<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    n: usize,
) -> Option<(f64, f64)> {
    let mut prev_x = a;
    let mut prev_f = f(a);
    for k in 1..=n {
        let x = a + (b - a) * k as f64 / n as f64;
        let fx = f(x);
        if prev_f != 0.0 && fx != 0.0 && prev_f * fx < 0.0 {
            return Some((prev_x, x));
        }
        prev_x = x;
        prev_f = fx;
    }
    None
}
