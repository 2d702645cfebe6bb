//! Profile pairs `(Q, phi)` sampled or solved on a grid, with their cached norm
//! coefficients.
//!
//! Two sources are available. [`ProfileSource::ClosedForm`] samples the explicit
//! formulas. [`ProfileSource::Resolved`] solves the discretised profile equation
//! `A_h Q + omega Q - Q^p = 0` by Newton's method (started from the samples) and
//! obtains `phi` from `L_+ phi = -Q`. The resolved pair is an exact stationary
//! state of the discrete flow, which is what long evolutions and the cubic
//! landscape expansion need: at the degenerate frequency the O(h²) mismatch of
//! the sampled formula is otherwise amplified secularly.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::grid::{dot_real, h1_norm, ComplexField, Grid, RealField};
use crate::numerics::roots::bracketed_root;
use crate::numerics::tridiag::TridiagLu;
use crate::soliton::{critical_frequency, rho_of_lambda, rho_tilde, ModelParams, NormCoefficients, Profile};
use crate::spectrum::linear_operator;

const NEWTON_MAX_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileSource {
    ClosedForm,
    Resolved,
}

/// `Q_omega`, `phi_omega` on one grid, plus `‖Q‖²`, `<Q, phi>`, `‖phi‖²` and `‖Q‖_{H¹}`.
#[derive(Debug, Clone)]
pub struct ProfileSet {
    params: ModelParams,
    omega: f64,
    source: ProfileSource,
    q: RealField,
    phi: RealField,
    coefficients: NormCoefficients,
    q_h1: f64,
}

impl ProfileSet {
    fn from_fields(params: ModelParams, omega: f64, source: ProfileSource, q: RealField, phi: RealField) -> Self {
        let grid = *q.grid();
        let coefficients = NormCoefficients {
            a: dot_real(&grid, q.values(), q.values()),
            b: dot_real(&grid, q.values(), phi.values()),
            c: dot_real(&grid, phi.values(), phi.values()),
        };
        let q_h1 = h1_norm(&q);
        Self { params, omega, source, q, phi, coefficients, q_h1 }
    }

    /// Samples of the explicit formulas.
    pub fn closed_form(params: &ModelParams, omega: f64, grid: &Grid) -> Result<Self> {
        let profile = Profile::new(params, omega)?;
        let q = grid.sample(|x| profile.value(x));
        let phi = grid.sample(|x| profile.domega(x));
        Ok(Self::from_fields(*params, omega, ProfileSource::ClosedForm, q, phi))
    }

    /// Discrete stationary state at `omega`.
    pub fn resolved(params: &ModelParams, omega: f64, grid: &Grid) -> Result<Self> {
        let (q, phi) = discrete_pair(params, omega, grid)?;
        Ok(Self::from_fields(*params, omega, ProfileSource::Resolved, q, phi))
    }

    /// Discrete stationary state at the discrete degenerate frequency, where `<Q_h, phi_h> = 0`.
    pub fn resolved_critical(params: &ModelParams, grid: &Grid) -> Result<Self> {
        let omega = discrete_critical_frequency(params, grid)?;
        Self::resolved(params, omega, grid)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn source(&self) -> ProfileSource {
        self.source
    }

    pub fn grid(&self) -> &Grid {
        self.q.grid()
    }

    pub fn q(&self) -> &RealField {
        &self.q
    }

    pub fn phi(&self) -> &RealField {
        &self.phi
    }

    pub fn coefficients(&self) -> &NormCoefficients {
        &self.coefficients
    }

    pub fn q_norm2(&self) -> f64 {
        self.coefficients.a
    }

    pub fn q_phi(&self) -> f64 {
        self.coefficients.b
    }

    pub fn phi_norm2(&self) -> f64 {
        self.coefficients.c
    }

    pub fn q_h1_norm(&self) -> f64 {
        self.q_h1
    }

    /// `rho(lambda) = -(‖phi‖² / (2 ‖Q‖²)) lambda²`.
    pub fn rho(&self, lambda: f64) -> f64 {
        rho_of_lambda(&self.coefficients, lambda)
    }

    pub fn rho_tilde(&self, lambda: f64, lambda_max: f64) -> Result<f64> {
        rho_tilde(&self.coefficients, lambda, lambda_max)
    }

    /// `(1 + rho) Q + lambda phi` as a complex field.
    pub fn combination(&self, lambda: f64, rho: f64) -> ComplexField {
        let grid = *self.grid();
        grid.sample_complex_indexed(|i| {
            Complex64::new((1.0 + rho) * self.q.values()[i] + lambda * self.phi.values()[i], 0.0)
        })
    }

    /// Mass-preserving perturbation `Q + lambda phi + rho_tilde(lambda) Q`.
    pub fn perturbed(&self, lambda: f64, lambda_max: f64) -> Result<ComplexField> {
        let rho = self.rho_tilde(lambda, lambda_max)?;
        Ok(self.combination(lambda, rho))
    }
}

/// Newton solve of the discrete profile equation, then `phi_h` from `L_+ phi_h = -Q_h`.
pub fn discrete_pair(params: &ModelParams, omega: f64, grid: &Grid) -> Result<(RealField, RealField)> {
    let profile = Profile::new(params, omega)?;
    let a = linear_operator(grid, params.gamma());
    let n = grid.n();
    let m = n - 2;
    let p = params.p();
    let mut q: Vec<f64> = (1..n - 1).map(|i| profile.value(grid.x(i))).collect();
    let scale = q.iter().fold(0.0f64, |s, v| s.max(v.abs())) * (omega + 4.0 / (grid.h() * grid.h()));
    let mut residual = vec![0.0; m];
    let mut converged = false;
    let mut lu = None;
    for _ in 0..NEWTON_MAX_ITERATIONS {
        a.matvec(&q, &mut residual);
        for j in 0..m {
            residual[j] += omega * q[j] - q[j].abs().powf(p - 1.0) * q[j];
        }
        let res_norm = residual.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let jac_diag: Vec<f64> = (0..m).map(|j| a.diag[j] + omega - p * q[j].abs().powf(p - 1.0)).collect();
        let factor = TridiagLu::factor(&a.off, &jac_diag, &a.off)?;
        if res_norm <= 1e-14 * scale {
            lu = Some(factor);
            converged = true;
            break;
        }
        factor.solve(&mut residual);
        for j in 0..m {
            q[j] -= residual[j];
        }
    }
    let lu = match (converged, lu) {
        (true, Some(lu)) => lu,
        _ => return Err(Error::NotConverged(format!("discrete profile Newton solve at omega = {omega}"))),
    };
    let mut phi: Vec<f64> = q.iter().map(|v| -v).collect();
    lu.solve(&mut phi);
    Ok((pad(grid, q), pad(grid, phi)))
}

fn pad(grid: &Grid, interior: Vec<f64>) -> RealField {
    let mut values = Vec::with_capacity(grid.n());
    values.push(0.0);
    values.extend(interior);
    values.push(0.0);
    RealField::from_vec_unchecked(*grid, values)
}

/// Root of `omega -> <Q_h(omega), phi_h(omega)>` near the continuum critical frequency.
pub fn discrete_critical_frequency(params: &ModelParams, grid: &Grid) -> Result<f64> {
    let omega = critical_frequency(params)?.omega_star;
    let b = |w: f64| -> Result<f64> {
        let (q, phi) = discrete_pair(params, w, grid)?;
        Ok(dot_real(grid, q.values(), phi.values()))
    };
    let mut width = 0.01;
    let (lo, hi) = loop {
        let lo = (omega * (1.0 - width)).max(params.omega_min() * (1.0 + 1e-6));
        let hi = omega * (1.0 + width);
        if b(lo)? * b(hi)? < 0.0 {
            break (lo, hi);
        }
        width *= 2.0;
        if width > 0.5 {
            return Err(Error::NotConverged("could not bracket the discrete critical frequency".into()));
        }
    };
    let mut failure = None;
    let root = bracketed_root(
        |w| match b(w) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        hi,
        1e-14 * omega,
    );
    match failure {
        Some(e) => Err(e),
        None => root,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{nehari, stationary_residual_of};
    use crate::numerics::grid::inner_product;
    use crate::soliton::DEFAULT_LAMBDA_MAX;

    fn p7() -> ModelParams {
        ModelParams::new(7.0, 1.0).unwrap()
    }

    #[test]
    fn resolved_profile_is_close_to_closed_form() {
        let params = p7();
        let omega = 1.2;
        let err = |n: usize| {
            let grid = Grid::new(40.0, n).unwrap();
            let r = ProfileSet::resolved(&params, omega, &grid).unwrap();
            let c = ProfileSet::closed_form(&params, omega, &grid).unwrap();
            let diff = r.q().combine(1.0, c.q(), -1.0).unwrap();
            h1_norm(&diff)
        };
        let (e1, e2) = (err(4001), err(8001));
        assert!(e2 < 2e-4, "{e2}");
        assert!((e1 / e2).log2() > 1.8, "{e1} {e2}");
    }

    #[test]
    fn resolved_profile_is_discretely_stationary() {
        let params = p7();
        let grid = Grid::new(40.0, 4001).unwrap();
        let r = ProfileSet::resolved(&params, 1.2, &grid).unwrap();
        let k = nehari(r.q(), &params, 1.2);
        assert!(k.abs() < 1e-11, "{k}");
        assert!(stationary_residual_of(&params, 1.2, r.q()).unwrap() < 1e-11);
    }

    #[test]
    fn discrete_phi_is_the_frequency_derivative() {
        let params = p7();
        let grid = Grid::new(40.0, 4001).unwrap();
        let omega = 1.2;
        let d = 1e-5;
        let (qp, _) = discrete_pair(&params, omega + d, &grid).unwrap();
        let (qm, _) = discrete_pair(&params, omega - d, &grid).unwrap();
        let (_, phi) = discrete_pair(&params, omega, &grid).unwrap();
        let fd = qp.combine(0.5 / d, &qm, -0.5 / d).unwrap();
        let diff = fd.combine(1.0, &phi, -1.0).unwrap();
        assert!(h1_norm(&diff) < 1e-7 * h1_norm(&phi));
    }

    #[test]
    fn discrete_critical_frequency_is_degenerate() {
        let params = p7();
        let grid = Grid::new(40.0, 8001).unwrap();
        let set = ProfileSet::resolved_critical(&params, &grid).unwrap();
        let omega = critical_frequency(&params).unwrap().omega_star;
        assert!((set.omega() - omega).abs() < 1e-3 * omega, "{} vs {omega}", set.omega());
        assert!(set.q_phi().abs() < 1e-12, "{}", set.q_phi());
    }

    #[test]
    fn closed_form_degeneracy_at_critical_frequency() {
        let params = p7();
        let omega = critical_frequency(&params).unwrap().omega_star;
        let b = |n: usize| {
            let grid = Grid::new(40.0, n).unwrap();
            ProfileSet::closed_form(&params, omega, &grid).unwrap().q_phi()
        };
        let (b1, b2) = (b(8001), b(16_001));
        let extrapolated = (4.0 * b2 - b1) / 3.0;
        assert!(extrapolated.abs() < 1e-8, "{b1} {b2} {extrapolated}");
    }

    #[test]
    fn rho_uses_grid_norms() {
        let params = p7();
        let grid = Grid::new(40.0, 8001).unwrap();
        let set = ProfileSet::closed_form(&params, critical_frequency(&params).unwrap().omega_star, &grid).unwrap();
        let qq = inner_product(set.q(), set.q()).unwrap();
        let pp = inner_product(set.phi(), set.phi()).unwrap();
        assert!((set.rho(0.01) + pp / (2.0 * qq) * 1e-4).abs() < 1e-18);
    }

    #[test]
    fn rho_tilde_restores_mass_and_approaches_rho() {
        let params = p7();
        let grid = Grid::new(40.0, 8001).unwrap();
        let set = ProfileSet::resolved_critical(&params, &grid).unwrap();
        let m0 = crate::functionals::mass(set.q());
        let u = set.perturbed(0.05, DEFAULT_LAMBDA_MAX).unwrap();
        assert!((crate::functionals::mass(&u) - m0).abs() < 1e-14 * m0);

        let ladder = [0.1, 0.05, 0.025, 0.0125];
        let diffs: Vec<f64> =
            ladder.iter().map(|&l| (set.rho_tilde(l, DEFAULT_LAMBDA_MAX).unwrap() - set.rho(l)).abs()).collect();
        let n = ladder.len() as f64;
        let xs: Vec<f64> = ladder.iter().map(|l| l.ln()).collect();
        let ys: Vec<f64> = diffs.iter().map(|d| d.ln()).collect();
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!(slope >= 3.0, "slope {slope}, diffs {diffs:?}");
        for (l, d) in ladder.iter().zip(&diffs) {
            assert!(d / (l * l) < 1e-2);
        }
    }
}
