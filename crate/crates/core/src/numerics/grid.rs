//! Uniform symmetric grids and the real/complex fields sampled on them.
//!
//! The origin is always the centre node, so the delta interaction and the
//! kink of the soliton sit exactly on a grid point. Integrals use the
//! composite trapezoid rule; derivatives inside norms and quadratic forms use
//! cell differences `(u[i+1] - u[i]) / h`, which keeps every functional the
//! exact discrete counterpart of the tridiagonal operator.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum half-width of the computational domain.
pub const MIN_HALF_WIDTH: f64 = 40.0;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Grid {
    half_width: f64,
    n: usize,
    h: f64,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.half_width.to_bits() == other.half_width.to_bits()
    }
}

/// Grid density expressed in nodes per decay length `1/sqrt(omega)` of the profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Resolution {
    /// 100 nodes per decay length, about n = 8001 on [-40, 40] near the critical frequency.
    Standard,
    /// 200 nodes per decay length; default for time evolution.
    Evolution,
    /// 1000 nodes per decay length; used where O(h^2) constants must be tiny.
    Fine,
    /// Explicit nodes per decay length.
    PerDecayLength(f64),
}

impl Resolution {
    pub fn nodes_per_decay_length(self) -> f64 {
        match self {
            Resolution::Standard => 100.0,
            Resolution::Evolution => 200.0,
            Resolution::Fine => 1000.0,
            Resolution::PerDecayLength(v) => v,
        }
    }
}

impl Grid {
    /// Grid on `[-half_width, half_width]` with `n` (odd) nodes.
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!("half-width must be positive, got {half_width}")));
        }
        if n < 5 || n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("node count must be odd and at least 5, got {n}")));
        }
        let h = 2.0 * half_width / (n - 1) as f64;
        Ok(Self { half_width, n, h })
    }

    /// Default half-width `max(40, 20/sqrt(omega - gamma^2/4))`.
    pub fn default_half_width(gamma: f64, omega: f64) -> f64 {
        let gap = omega - 0.25 * gamma * gamma;
        if gap > 0.0 {
            MIN_HALF_WIDTH.max(20.0 / gap.sqrt())
        } else {
            MIN_HALF_WIDTH
        }
    }

    /// Grid adapted to the decay rate of the profile at frequency `omega`.
    pub fn for_frequency(gamma: f64, omega: f64, resolution: Resolution) -> Result<Self> {
        if !(omega > 0.0) {
            return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
        }
        let half_width = Self::default_half_width(gamma, omega);
        let h_target = 1.0 / (omega.sqrt() * resolution.nodes_per_decay_length());
        let half_cells = (half_width / h_target).ceil() as usize;
        Self::new(half_width, 2 * half_cells.max(2) + 1)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn x_min(&self) -> f64 {
        -self.half_width
    }

    pub fn x_max(&self) -> f64 {
        self.half_width
    }

    /// Index of the node at x = 0.
    pub fn center(&self) -> usize {
        (self.n - 1) / 2
    }

    /// Coordinate of node `i`; computed relative to the centre so that `x(c+k) == -x(c-k)` exactly.
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.center() as f64) * self.h
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.x(i))
    }

    /// Trapezoid weight of node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n {
            0.5 * self.h
        } else {
            self.h
        }
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> RealField {
        RealField { grid: *self, values: self.nodes().map(f).collect() }
    }

    pub fn sample_complex<F: Fn(f64) -> Complex64>(&self, f: F) -> ComplexField {
        ComplexField { grid: *self, values: self.nodes().map(f).collect() }
    }

    pub fn sample_indexed<F: Fn(usize) -> f64>(&self, f: F) -> RealField {
        RealField { grid: *self, values: (0..self.n).map(f).collect() }
    }

    pub fn sample_complex_indexed<F: Fn(usize) -> Complex64>(&self, f: F) -> ComplexField {
        ComplexField { grid: *self, values: (0..self.n).map(f).collect() }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len == self.n {
            Ok(())
        } else {
            Err(Error::InvalidGrid(format!("expected {} samples, got {len}", self.n)))
        }
    }
}

/// Real samples on a grid (profiles, eigenvectors, test functions).
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: Grid,
    values: Vec<f64>,
}

/// Complex samples on a grid (solutions and remainders).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl RealField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.n] }
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n);
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at_zero(&self) -> f64 {
        self.values[self.grid.center()]
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField { grid: self.grid, values: self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect() }
    }

    /// `self * a + other * b`.
    pub fn combine(&self, a: f64, other: &RealField, b: f64) -> Result<RealField> {
        same_grid(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(RealField { grid: self.grid, values })
    }

    pub fn scaled(&self, a: f64) -> RealField {
        RealField { grid: self.grid, values: self.values.iter().map(|v| a * v).collect() }
    }
}

impl ComplexField {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        grid.check_len(values.len())?;
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite);
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.n] }
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.n);
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn at_zero(&self) -> Complex64 {
        self.values[self.grid.center()]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn real_part(&self) -> RealField {
        RealField { grid: self.grid, values: self.values.iter().map(|v| v.re).collect() }
    }

    pub fn imag_part(&self) -> RealField {
        RealField { grid: self.grid, values: self.values.iter().map(|v| v.im).collect() }
    }

    /// `e^{i theta} * self`.
    pub fn rotated(&self, theta: f64) -> ComplexField {
        let phase = Complex64::from_polar(1.0, theta);
        self.scaled(phase)
    }

    pub fn scaled(&self, a: Complex64) -> ComplexField {
        ComplexField { grid: self.grid, values: self.values.iter().map(|v| a * v).collect() }
    }

    pub fn sub(&self, other: &ComplexField) -> Result<ComplexField> {
        same_grid(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x - y).collect();
        Ok(ComplexField { grid: self.grid, values })
    }

    pub fn add(&self, other: &ComplexField) -> Result<ComplexField> {
        same_grid(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x + y).collect();
        Ok(ComplexField { grid: self.grid, values })
    }
}

/// Read access shared by real and complex fields.
pub trait Field {
    fn grid(&self) -> &Grid;
    fn value(&self, i: usize) -> Complex64;
}

impl Field for RealField {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn value(&self, i: usize) -> Complex64 {
        Complex64::new(self.values[i], 0.0)
    }
}

impl Field for ComplexField {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn value(&self, i: usize) -> Complex64 {
        self.values[i]
    }
}

pub(crate) fn same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// `Re ∫ u conj(v) dx` by the composite trapezoid rule.
pub fn inner_product<U: Field, V: Field>(u: &U, v: &V) -> Result<f64> {
    let grid = *u.grid();
    same_grid(&grid, v.grid())?;
    Ok((0..grid.n).map(|i| grid.weight(i) * (u.value(i) * v.value(i).conj()).re).sum())
}

/// Trapezoid inner product of two real sample slices on `grid`.
pub(crate) fn dot_real(grid: &Grid, u: &[f64], v: &[f64]) -> f64 {
    let n = grid.n;
    let interior: f64 = u[1..n - 1].iter().zip(&v[1..n - 1]).map(|(a, b)| a * b).sum();
    grid.h * (interior + 0.5 * (u[0] * v[0] + u[n - 1] * v[n - 1]))
}

/// `Σ w_i u_i v_i` for complex `u` and real `v` (no conjugation needed since `v` is real).
pub(crate) fn pair_complex_real(grid: &Grid, u: &[Complex64], v: &[f64]) -> Complex64 {
    let n = grid.n;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 1..n - 1 {
        acc += u[i] * v[i];
    }
    acc += 0.5 * (u[0] * v[0] + u[n - 1] * v[n - 1]);
    acc * grid.h
}

/// `Σ_cells h (Δu/h)(Δv/h)` for complex `u` and real `v`.
pub(crate) fn pair_gradient_complex_real(grid: &Grid, u: &[Complex64], v: &[f64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..grid.n - 1 {
        acc += (u[i + 1] - u[i]) * (v[i + 1] - v[i]);
    }
    acc / grid.h
}

/// Squared L² norm of `|u'|` from cell differences.
pub(crate) fn gradient_norm2<U: Field>(u: &U) -> f64 {
    let grid = u.grid();
    let mut acc = 0.0;
    for i in 0..grid.n - 1 {
        acc += (u.value(i + 1) - u.value(i)).norm_sqr();
    }
    acc / grid.h
}

pub fn l2_norm<U: Field>(u: &U) -> f64 {
    let grid = u.grid();
    (0..grid.n).map(|i| grid.weight(i) * u.value(i).norm_sqr()).sum::<f64>().sqrt()
}

/// `‖u'‖₂` with the cell-difference gradient.
pub fn dx_norm<U: Field>(u: &U) -> f64 {
    gradient_norm2(u).sqrt()
}

/// `sqrt(‖u'‖₂² + ‖u‖₂²)`.
pub fn h1_norm<U: Field>(u: &U) -> f64 {
    let l2 = l2_norm(u);
    (gradient_norm2(u) + l2 * l2).sqrt()
}

pub fn point_value_at_zero<U: Field>(u: &U) -> Complex64 {
    u.value(u.grid().center())
}
