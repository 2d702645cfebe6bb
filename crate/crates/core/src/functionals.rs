//! Mass, energy, action, Nehari functional and the second/third variations of
//! the action, evaluated on grid fields.
//!
//! Gradients are cell differences and integrals are trapezoid sums; the delta
//! interaction enters every quadratic form as `-gamma |u(0)|^2` through the
//! centre node.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::grid::{gradient_norm2, same_grid, ComplexField, Field, Grid, RealField};
use crate::profiles::ProfileSet;
use crate::soliton::{ModelParams, Profile};

/// Whether the `|u|^{p+1}` term is included in the energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Nonlinearity {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValues {
    pub mass: f64,
    pub energy: f64,
    /// `S_omega = E + omega M` at the reference frequency.
    pub action: f64,
    /// `K_omega`.
    pub nehari: f64,
}

fn weighted_sum<U: Field, F: Fn(Complex64) -> f64>(u: &U, f: F) -> f64 {
    let grid = u.grid();
    (0..grid.n()).map(|i| grid.weight(i) * f(u.value(i))).sum()
}

/// `M(u) = ½ ∫ |u|²`.
pub fn mass<U: Field>(u: &U) -> f64 {
    0.5 * weighted_sum(u, |z| z.norm_sqr())
}

fn potential_sum<U: Field>(u: &U, p: f64) -> f64 {
    let e = 0.5 * (p + 1.0);
    weighted_sum(u, |z| z.norm_sqr().powf(e))
}

/// `E(u) = ½ ∫ |u'|² - (gamma/2) |u(0)|² - 1/(p+1) ∫ |u|^{p+1}`.
pub fn energy<U: Field>(u: &U, params: &ModelParams) -> f64 {
    energy_with(u, params, Nonlinearity::On)
}

pub fn energy_with<U: Field>(u: &U, params: &ModelParams, nonlinearity: Nonlinearity) -> f64 {
    let center = u.value(u.grid().center()).norm_sqr();
    let linear = 0.5 * gradient_norm2(u) - 0.5 * params.gamma() * center;
    match nonlinearity {
        Nonlinearity::On => linear - potential_sum(u, params.p()) / (params.p() + 1.0),
        Nonlinearity::Off => linear,
    }
}

/// `S_omega(u) = E(u) + omega M(u)`.
pub fn action<U: Field>(u: &U, params: &ModelParams, omega: f64) -> f64 {
    energy(u, params) + omega * mass(u)
}

/// `K_omega(u) = ∫ |u'|² + omega ∫ |u|² - gamma |u(0)|² - ∫ |u|^{p+1}`.
pub fn nehari<U: Field>(u: &U, params: &ModelParams, omega: f64) -> f64 {
    let center = u.value(u.grid().center()).norm_sqr();
    gradient_norm2(u) + 2.0 * omega * mass(u) - params.gamma() * center - potential_sum(u, params.p())
}

pub fn values<U: Field>(u: &U, params: &ModelParams, omega: f64) -> FunctionalValues {
    let m = mass(u);
    let e = energy(u, params);
    FunctionalValues { mass: m, energy: e, action: e + omega * m, nehari: nehari(u, params, omega) }
}

/// `S''_omega(Q)(f, g)`: real parts see `-∂² + omega - gamma delta - p Q^{p-1}`,
/// imaginary parts see `-∂² + omega - gamma delta - Q^{p-1}`.
pub fn bilinear_s2(params: &ModelParams, omega: f64, q: &RealField, f: &ComplexField, g: &ComplexField) -> Result<f64> {
    let grid = *q.grid();
    same_grid(&grid, f.grid())?;
    same_grid(&grid, g.grid())?;
    let (qv, fv, gv) = (q.values(), f.values(), g.values());
    let p = params.p();
    let n = grid.n();
    let mut gradient = 0.0;
    for i in 0..n - 1 {
        let df = fv[i + 1] - fv[i];
        let dg = gv[i + 1] - gv[i];
        gradient += df.re * dg.re + df.im * dg.im;
    }
    gradient /= grid.h();
    let mut potential = 0.0;
    for i in 0..n {
        let qp = qv[i].abs().powf(p - 1.0);
        potential += grid.weight(i) * ((omega - p * qp) * fv[i].re * gv[i].re + (omega - qp) * fv[i].im * gv[i].im);
    }
    let c = grid.center();
    let delta = params.gamma() * (fv[c].re * gv[c].re + fv[c].im * gv[c].im);
    Ok(gradient + potential - delta)
}

/// `S'''(Q)(v, v, v) = -p (p-1) ∫ Q^{p-2} v³` for a real direction `v`.
pub fn trilinear_real(params: &ModelParams, q: &RealField, v: &RealField) -> Result<f64> {
    let grid = *q.grid();
    same_grid(&grid, v.grid())?;
    let p = params.p();
    let sum: f64 =
        (0..grid.n()).map(|i| grid.weight(i) * q.values()[i].abs().powf(p - 2.0) * v.values()[i].powi(3)).sum();
    Ok(-p * (p - 1.0) * sum)
}

/// Weak form `∫ Q'ψ' + omega Q ψ - gamma Q(0) ψ(0) - Q^p ψ` of the profile equation.
pub fn weak_residual(params: &ModelParams, omega: f64, q: &RealField, psi: &RealField) -> Result<f64> {
    let grid = *q.grid();
    same_grid(&grid, psi.grid())?;
    let (qv, pv) = (q.values(), psi.values());
    let p = params.p();
    let mut gradient = 0.0;
    for i in 0..grid.n() - 1 {
        gradient += (qv[i + 1] - qv[i]) * (pv[i + 1] - pv[i]);
    }
    gradient /= grid.h();
    let bulk: f64 =
        (0..grid.n()).map(|i| grid.weight(i) * (omega * qv[i] - qv[i].abs().powf(p - 1.0) * qv[i]) * pv[i]).sum();
    let c = grid.center();
    Ok(gradient + bulk - params.gamma() * qv[c] * pv[c])
}

/// Fixed family of Gaussian test functions used by [`stationary_residual`].
pub fn test_basis(grid: &Grid) -> Vec<RealField> {
    let mut basis = Vec::new();
    for j in -8..=8 {
        let center = 0.5 * j as f64;
        basis.push(grid.sample(|x| (-(x - center) * (x - center)).exp()));
    }
    for &width in &[0.25, 0.5] {
        basis.push(grid.sample(|x| (-(x / width) * (x / width)).exp()));
    }
    basis
}

/// `max_psi |weak residual of q against psi|` over [`test_basis`].
pub fn stationary_residual_of(params: &ModelParams, omega: f64, q: &RealField) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for psi in test_basis(q.grid()) {
        worst = worst.max(weak_residual(params, omega, q, &psi)?.abs());
    }
    Ok(worst)
}

/// Weak-form residual of the closed-form profile `Q_omega` sampled on `grid`.
pub fn stationary_residual(params: &ModelParams, omega: f64, grid: &Grid) -> Result<f64> {
    let profile = Profile::new(params, omega)?;
    let q = grid.sample(|x| profile.value(x));
    stationary_residual_of(params, omega, &q)
}

/// One rung of the cubic-expansion ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionRow {
    pub lambda: f64,
    /// `S_Omega(Q + lambda phi + rho~(lambda) Q) - S_Omega(Q)`.
    pub difference: f64,
    /// `(1/6) d'''(Omega) lambda³`.
    pub predicted: f64,
}

/// Log-log fit of the action difference against `lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubicExpansion {
    pub rows: Vec<ExpansionRow>,
    /// Fitted exponent of `|difference|` in `lambda`.
    pub exponent: f64,
    /// Fitted difference divided by `lambda³` at the geometric mean of the ladder.
    pub coefficient: f64,
    /// `(1/6) d'''(Omega)`.
    pub predicted_coefficient: f64,
    /// `|coefficient / predicted_coefficient - 1|`.
    pub coefficient_rel_error: f64,
}

/// `S_Omega(Q + lambda phi + rho~ Q) - S_Omega(Q)` over `ladder`, using the profiles'
/// frequency as `Omega`. Rows with `lambda = 0` give zero and are excluded from the fit.
pub fn cubic_expansion(profiles: &ProfileSet, d3: f64, ladder: &[f64], lambda_max: f64) -> Result<CubicExpansion> {
    let params = profiles.params();
    let omega = profiles.omega();
    let s0 = action(profiles.q(), params, omega);
    let mut rows = Vec::with_capacity(ladder.len());
    for &lambda in ladder {
        let difference =
            if lambda == 0.0 { 0.0 } else { action(&profiles.perturbed(lambda, lambda_max)?, params, omega) - s0 };
        rows.push(ExpansionRow { lambda, difference, predicted: d3 / 6.0 * lambda.powi(3) });
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.lambda != 0.0 && r.difference != 0.0)
        .map(|r| (r.lambda.abs().ln(), r.difference.abs().ln()))
        .collect();
    if points.len() < 2 {
        return Err(Error::InvalidParameter("the ladder needs two non-zero rungs".into()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let exponent = sxy / sxx;
    // The fitted line passes through the centroid (mx, my).
    let sign = rows.iter().find(|r| r.difference != 0.0).map_or(1.0, |r| r.difference.signum());
    let coefficient = sign * (my - 3.0 * mx).exp();
    let predicted_coefficient = d3 / 6.0;
    Ok(CubicExpansion {
        rows,
        exponent,
        coefficient,
        predicted_coefficient,
        coefficient_rel_error: (coefficient / predicted_coefficient - 1.0).abs(),
    })
}
