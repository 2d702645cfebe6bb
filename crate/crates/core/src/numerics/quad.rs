//! Adaptive Gauss–Kronrod (10/21-point) quadrature for the scalar integrals
//! behind the critical frequency and the closed-form mass.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// Upper bound on the number of subintervals before giving up.
pub const MAX_INTERVALS: usize = 4000;

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment { a, b, value: kronrod * half, error: ((kronrod - gauss) * half).abs() }
}

/// Integrate `f` over `[a, b]` (`b` may be `f64::INFINITY`) to absolute accuracy `tol`.
///
/// A semi-infinite range is mapped to `[0, 1)` by `x = a + t/(1-t)`.
pub fn adaptive_quad<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) || a.is_nan() || b.is_nan() || !a.is_finite() {
        return Err(Error::InvalidParameter(format!("adaptive_quad: a = {a}, b = {b}, tol = {tol}")));
    }
    if b == f64::INFINITY {
        let g = |t: f64| {
            let s = 1.0 - t;
            let v = f(a + t / s) / (s * s);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        return integrate_finite(&g, 0.0, 1.0, tol).map_err(|e| match e {
            Error::QuadratureNotConverged { error, tol, .. } => Error::QuadratureNotConverged { a, b, error, tol },
            other => other,
        });
    }
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return adaptive_quad(f, b, a, tol).map(|v| -v);
    }
    integrate_finite(&f, a, b, tol)
}

fn integrate_finite<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let mut heap = BinaryHeap::new();
    let first = gauss_kronrod(f, a, b);
    let mut total = first.value;
    let mut error = first.error;
    heap.push(first);
    while error > tol.max(50.0 * f64::EPSILON * total.abs()) {
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::QuadratureNotConverged { a, b, error, tol });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(Error::QuadratureNotConverged { a, b, error, tol });
        }
        let left = gauss_kronrod(f, worst.a, mid);
        let right = gauss_kronrod(f, mid, worst.b);
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if heap.len() % 64 == 0 {
            // Re-sum to shed accumulated cancellation in the running totals.
            total = heap.iter().map(|s| s.value).sum();
            error = heap.iter().map(|s| s.error).sum();
        }
    }
    Ok(heap.iter().map(|s| s.value).sum())
}

/// `sech(y)^k`, evaluated in log form so large `y` neither overflows nor loses precision.
pub fn sech_pow(y: f64, k: f64) -> f64 {
    let y = y.abs();
    (k * (std::f64::consts::LN_2 - y - (-2.0 * y).exp().ln_1p())).exp()
}

/// Truncation point `Y` with `sech(Y)^k < tol * 1e-3`, from `sech(y) <= 2 e^{-y}`.
///
/// The neglected tail is then at most `tol * 1e-3 / k`.
pub fn sech_tail_cutoff(k: f64, tol: f64) -> f64 {
    std::f64::consts::LN_2 - (tol * 1e-3).ln() / k
}

/// `∫_a^∞ sech(y)^k dy` on the truncated range `[a, Y]`.
pub fn sech_power_tail(k: f64, a: f64, tol: f64) -> Result<f64> {
    let upper = sech_tail_cutoff(k, tol);
    if a >= upper {
        return Ok(0.0);
    }
    adaptive_quad(|y| sech_pow(y, k), a, upper, tol)
}
