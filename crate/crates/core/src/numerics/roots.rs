//! Bracketed scalar root finding (Brent's safeguarded secant/inverse-quadratic/bisection hybrid).

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 300;

/// Root of `f` in `[lo, hi]` located to bracket width `tol`.
pub fn bracketed_root<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) || !(lo < hi) {
        return Err(Error::InvalidParameter(format!("bracketed_root: lo = {lo}, hi = {hi}, tol = {tol}")));
    }
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa * fb < 0.0) {
        return Err(Error::Bracketing { lo, hi, f_lo: fa, f_hi: fb });
    }
    let (mut c, mut fc) = (b, fb);
    let (mut d, mut e) = (b - a, b - a);
    for _ in 0..MAX_ITERATIONS {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * m * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = d;
            }
        } else {
            d = m;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(m) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(Error::NotConverged(format!("root function returned {fb} at {b}")));
        }
    }
    Err(Error::NotConverged(format!("bracketed_root: no convergence in {MAX_ITERATIONS} iterations")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_root_of_four() {
        let r = bracketed_root(|x| x * x - 4.0, 0.0, 5.0, 1e-12).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_tanh() {
        let r = bracketed_root(|x| x.tanh() - 0.5, 0.0, 2.0, 1e-12).unwrap();
        assert!((r - 0.5f64.atanh()).abs() < 1e-12);
    }

    #[test]
    fn missing_sign_change_is_an_error() {
        let r = bracketed_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12);
        assert!(matches!(r, Err(Error::Bracketing { .. })));
    }

    #[test]
    fn steep_and_flat_functions() {
        let r = bracketed_root(|x| (x - 0.3).powi(3), 0.0, 1.0, 1e-12).unwrap();
        assert!((r - 0.3).abs() < 1e-4);
        let r = bracketed_root(|x| (20.0 * (x - 0.7)).tanh(), 0.0, 1.0, 1e-13).unwrap();
        assert!((r - 0.7).abs() < 1e-12);
    }
}
