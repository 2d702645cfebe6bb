//! Modulation analysis around the degenerate solitary wave.
//!
//! A state `u` near the orbit is written as
//!
//! ```text
//! u = e^{-i theta} (Q + lambda phi + rho(lambda) Q + eps),   rho(lambda) = -(‖phi‖² / (2 ‖Q‖²)) lambda²,
//! ```
//!
//! with `eps` orthogonal to `iQ` and `phi`. The virial quantity is `I = <i eps, Phi>` with
//! `Phi = phi - lambda (‖phi‖² / ‖Q‖²) Q`, and its predicted slope is `½ d'''(Omega) lambda²`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{Control, Observer, TimeSeries};
use crate::functionals::FunctionalValues;
use crate::numerics::grid::{
    h1_norm, inner_product, l2_norm, pair_complex_real, pair_gradient_complex_real, same_grid, ComplexField, RealField,
};
use crate::profiles::ProfileSet;
use crate::soliton::{rho_of_lambda, ModelParams};

/// Newton iterations allowed in [`Modulation::decompose`].
pub const MAX_NEWTON_ITERATIONS: usize = 50;
/// Default tube radius as a multiple of `‖Q‖_{H¹}`.
pub const DEFAULT_TUBE_FACTOR: f64 = 0.5;

const RESIDUAL_REL_TOL: f64 = 1e-10;
const RESIDUAL_FLOOR: f64 = 1e-13;
const MAX_HALVINGS: usize = 30;

/// `inf_theta ‖u - Q e^{i theta}‖_{H¹}`, evaluated at the exact optimal rotation.
///
/// With `z = Σ w u Q + Σ (Δu)(ΔQ)/h` the minimiser is `theta* = arg z`.
pub fn orbital_distance(u: &ComplexField, q: &RealField) -> Result<f64> {
    let (_, distance) = orbital_fit(u, q)?;
    Ok(distance)
}

/// Optimal rotation `theta*` and the distance it attains.
pub fn orbital_fit(u: &ComplexField, q: &RealField) -> Result<(f64, f64)> {
    same_grid(u.grid(), q.grid())?;
    let grid = u.grid();
    let z = pair_complex_real(grid, u.values(), q.values()) + pair_gradient_complex_real(grid, u.values(), q.values());
    let theta = if z.norm() == 0.0 { 0.0 } else { z.arg() };
    let rotation = Complex64::from_polar(1.0, theta);
    let diff = grid.sample_complex_indexed(|i| u.values()[i] - rotation * q.values()[i]);
    Ok((theta, h1_norm(&diff)))
}

/// Orbital distance from the closed-form profile at `omega` sampled on the grid of `u`.
pub fn orbital_distance_to_profile(u: &ComplexField, params: &ModelParams, omega: f64) -> Result<f64> {
    let profiles = ProfileSet::closed_form(params, omega, u.grid())?;
    orbital_distance(u, profiles.q())
}

#[derive(Debug, Clone)]
pub struct ModulationState {
    pub theta: f64,
    pub lambda: f64,
    pub rho: f64,
    pub eps: ComplexField,
    /// `<eps, iQ>` and `<eps, phi>` after the solve.
    pub orth_residuals: [f64; 2],
    pub eps_h1: f64,
    pub eps_l2: f64,
    /// `<eps, Q>`.
    pub eps_q_pairing: f64,
    pub iterations: usize,
}

/// Per-sample scalars kept while tracking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackedSample {
    pub t: f64,
    pub theta: f64,
    pub lambda: f64,
    pub eps_h1: f64,
    pub eps_l2: f64,
    pub eps_q_pairing: f64,
    pub orth_residuals: [f64; 2],
    pub virial: f64,
    pub virial_bound: f64,
    pub orbital_distance: f64,
    pub eps_mass_ratio: f64,
    pub mass: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirialRecord {
    pub t: f64,
    #[serde(rename = "I")]
    pub i: f64,
    pub di_dt_fd: f64,
    pub predicted_slope: f64,
    pub lambda: f64,
    pub eps_h1: f64,
    pub lambda_t_fd: f64,
    pub theta_t_fd: f64,
    /// `(|lambda_t| + |theta_t + Omega|) / (|lambda| + ‖eps‖_{H¹})`.
    pub paradyn_ratio: f64,
}

/// Decomposition engine bound to one set of critical profiles.
#[derive(Debug, Clone)]
pub struct Modulation {
    profiles: ProfileSet,
    d3: f64,
    tube_radius: f64,
}

impl Modulation {
    /// `d3` is `d'''(Omega)`, used by the slope prediction.
    pub fn new(profiles: ProfileSet, d3: f64) -> Self {
        let tube_radius = DEFAULT_TUBE_FACTOR * profiles.q_h1_norm();
        Self { profiles, d3, tube_radius }
    }

    pub fn with_tube_radius(mut self, radius: f64) -> Self {
        self.tube_radius = radius;
        self
    }

    pub fn profiles(&self) -> &ProfileSet {
        &self.profiles
    }

    pub fn d3(&self) -> f64 {
        self.d3
    }

    pub fn omega(&self) -> f64 {
        self.profiles.omega()
    }

    pub fn tube_radius(&self) -> f64 {
        self.tube_radius
    }

    pub fn rho(&self, lambda: f64) -> f64 {
        rho_of_lambda(self.profiles.coefficients(), lambda)
    }

    /// `eps = e^{i theta} u - (1 + rho) Q - lambda phi`.
    pub fn remainder(&self, u: &ComplexField, theta: f64, lambda: f64) -> Result<ComplexField> {
        same_grid(u.grid(), self.profiles.grid())?;
        let rotation = Complex64::from_polar(1.0, theta);
        let rho = self.rho(lambda);
        let q = self.profiles.q().values();
        let phi = self.profiles.phi().values();
        Ok(u.grid().sample_complex_indexed(|i| rotation * u.values()[i] - (1.0 + rho) * q[i] - lambda * phi[i]))
    }

    /// `e^{-i theta} (Q + lambda phi + rho(lambda) Q + eps)`.
    pub fn reconstruct(&self, state: &ModulationState) -> ComplexField {
        let rotation = Complex64::from_polar(1.0, -state.theta);
        let q = self.profiles.q().values();
        let phi = self.profiles.phi().values();
        let eps = state.eps.values();
        state
            .eps
            .grid()
            .sample_complex_indexed(|i| rotation * ((1.0 + state.rho) * q[i] + state.lambda * phi[i] + eps[i]))
    }

    /// Solves `<eps, iQ> = 0`, `<eps, phi> = 0` for `(theta, lambda)` by damped Newton from
    /// `guess`, then checks the tube condition `‖eps‖_{H¹} <= tube_radius`.
    pub fn decompose(&self, u: &ComplexField, guess: (f64, f64)) -> Result<ModulationState> {
        same_grid(u.grid(), self.profiles.grid())?;
        if !u.is_finite() {
            return Err(Error::NonFinite);
        }
        let grid = u.grid();
        let q = self.profiles.q().values();
        let phi = self.profiles.phi().values();
        let z_q = pair_complex_real(grid, u.values(), q);
        let z_phi = pair_complex_real(grid, u.values(), phi);
        let a = self.profiles.q_norm2();
        let b = self.profiles.q_phi();
        let c = self.profiles.phi_norm2();
        let q_norm = a.sqrt();
        let u_norm = l2_norm(u);

        let residual = |theta: f64, lambda: f64| -> [f64; 2] {
            let r = Complex64::from_polar(1.0, theta);
            let f1 = (r * z_q).im;
            let f2 = (r * z_phi).re - (1.0 + self.rho(lambda)) * b - lambda * c;
            [f1, f2]
        };
        let eps_estimate = |theta: f64, lambda: f64| -> f64 {
            // ‖eps‖² = ‖u‖² - 2 Re <e^{i theta} u, (1+rho) Q + lambda phi> + ‖(1+rho) Q + lambda phi‖².
            let r = Complex64::from_polar(1.0, theta);
            let rho = self.rho(lambda);
            let cross = (1.0 + rho) * (r * z_q).re + lambda * (r * z_phi).re;
            let target = (1.0 + rho).powi(2) * a + 2.0 * (1.0 + rho) * lambda * b + lambda * lambda * c;
            (u_norm * u_norm - 2.0 * cross + target).max(0.0).sqrt()
        };
        let norm = |f: [f64; 2]| f[0].hypot(f[1]);

        let (mut theta, mut lambda) = guess;
        let mut f = residual(theta, lambda);
        let mut iterations = 0;
        loop {
            let tol = RESIDUAL_REL_TOL * q_norm * eps_estimate(theta, lambda) + RESIDUAL_FLOOR * a;
            if norm(f) <= tol {
                break;
            }
            if iterations == MAX_NEWTON_ITERATIONS {
                return Err(Error::DecompositionFailure(format!(
                    "Newton did not converge in {MAX_NEWTON_ITERATIONS} iterations (residual {:e})",
                    norm(f)
                )));
            }
            iterations += 1;
            let r = Complex64::from_polar(1.0, theta);
            let j11 = (r * z_q).re;
            let j21 = -(r * z_phi).im;
            let j22 = -c + (c / a) * lambda * b;
            let det = j11 * j22;
            if det == 0.0 || !det.is_finite() {
                return Err(Error::DecompositionFailure("singular modulation Jacobian".into()));
            }
            let d_theta = -f[0] / j11;
            let d_lambda = (-f[1] - j21 * d_theta) / j22;
            let mut step = 1.0;
            let mut next = (theta + d_theta, lambda + d_lambda);
            let mut f_next = residual(next.0, next.1);
            let mut halvings = 0;
            while !(norm(f_next) < norm(f)) && halvings < MAX_HALVINGS {
                step *= 0.5;
                next = (theta + step * d_theta, lambda + step * d_lambda);
                f_next = residual(next.0, next.1);
                halvings += 1;
            }
            if !(norm(f_next) < norm(f)) {
                return Err(Error::DecompositionFailure(format!("Newton stalled at residual {:e}", norm(f))));
            }
            (theta, lambda) = next;
            f = f_next;
        }

        let eps = self.remainder(u, theta, lambda)?;
        let eps_h1 = h1_norm(&eps);
        if !(eps_h1 <= self.tube_radius) {
            return Err(Error::DecompositionFailure(format!(
                "state left the tube: ‖eps‖_H1 = {eps_h1:e} > {:e}",
                self.tube_radius
            )));
        }
        let iq = self.profiles.q().to_complex().scaled(Complex64::new(0.0, 1.0));
        let orth_residuals = [inner_product(&eps, &iq)?, inner_product(&eps, self.profiles.phi())?];
        let eps_q_pairing = inner_product(&eps, self.profiles.q())?;
        Ok(ModulationState {
            theta,
            lambda,
            rho: self.rho(lambda),
            eps_l2: l2_norm(&eps),
            eps,
            orth_residuals,
            eps_h1,
            eps_q_pairing,
            iterations,
        })
    }

    /// `Phi = phi - lambda (‖phi‖² / ‖Q‖²) Q`.
    pub fn virial_direction(&self, lambda: f64) -> RealField {
        let ratio = self.profiles.phi_norm2() / self.profiles.q_norm2();
        self.profiles.phi().combine(1.0, self.profiles.q(), -lambda * ratio).expect("profiles share a grid")
    }

    /// `I = <i eps, Phi>`.
    pub fn virial(&self, state: &ModulationState) -> Result<f64> {
        self.virial_of(state.lambda, &state.eps)
    }

    pub fn virial_of(&self, lambda: f64, eps: &ComplexField) -> Result<f64> {
        let i_eps = eps.scaled(Complex64::new(0.0, 1.0));
        inner_product(&i_eps, &self.virial_direction(lambda))
    }

    /// Cauchy–Schwarz bound `‖eps‖₂ (‖phi‖₂ + |lambda| ‖phi‖₂² / ‖Q‖₂)` on `|I|`.
    pub fn virial_bound(&self, state: &ModulationState) -> f64 {
        let phi = self.profiles.phi_norm2().sqrt();
        let q = self.profiles.q_norm2().sqrt();
        state.eps_l2 * (phi + state.lambda.abs() * phi * phi / q)
    }

    /// `½ d'''(Omega) lambda²`.
    pub fn predicted_slope(&self, lambda: f64) -> f64 {
        virial_slope_prediction(self.d3, lambda)
    }

    /// `|<eps, Q>| / (‖eps‖² + |lambda| ‖eps‖ + lambda⁴)` with H¹ norms; zero when the
    /// denominator vanishes.
    pub fn eps_mass_pairing_check(&self, state: &ModulationState) -> f64 {
        let e = state.eps_h1;
        let l = state.lambda.abs();
        let denominator = e * e + l * e + l.powi(4);
        if denominator == 0.0 {
            0.0
        } else {
            state.eps_q_pairing.abs() / denominator
        }
    }

    /// `<eps, Q>` predicted by mass conservation `M(u) = M(Q)`:
    /// `(1 + rho) <eps, Q> = -(rho a + ½ rho² a + ½ lambda² c + lambda (1 + rho) b + lambda <phi, eps> + ½ ‖eps‖²)`.
    pub fn eps_q_from_mass_identity(&self, state: &ModulationState) -> Result<f64> {
        let a = self.profiles.q_norm2();
        let b = self.profiles.q_phi();
        let c = self.profiles.phi_norm2();
        let rho = state.rho;
        let lambda = state.lambda;
        let phi_eps = inner_product(&state.eps, self.profiles.phi())?;
        let rhs = rho * a
            + 0.5 * rho * rho * a
            + 0.5 * lambda * lambda * c
            + lambda * (1.0 + rho) * b
            + lambda * phi_eps
            + 0.5 * state.eps_l2 * state.eps_l2;
        Ok(-rhs / (1.0 + rho))
    }

    /// `‖eps‖²_{H¹} / (-(2/kappa) d'''(Omega) lambda³)`.
    pub fn eps_clamp_ratio(&self, state: &ModulationState, kappa: f64) -> f64 {
        let bound = -(2.0 / kappa) * self.d3 * state.lambda.powi(3);
        state.eps_h1 * state.eps_h1 / bound
    }

    pub fn tracker(&self) -> Tracker<'_> {
        Tracker::new(self)
    }

    /// Tracks the snapshots stored in `series`.
    pub fn track(&self, series: &TimeSeries) -> Result<TrackReport> {
        let mut tracker = self.tracker();
        for snapshot in &series.snapshots {
            let index = series.times.iter().position(|&t| t == snapshot.t);
            let values = index.map(|k| series.values[k]).unwrap_or(FunctionalValues {
                mass: crate::functionals::mass(&snapshot.field),
                energy: crate::functionals::energy(&snapshot.field, self.profiles.params()),
                action: f64::NAN,
                nehari: f64::NAN,
            });
            if tracker.observe(snapshot.t, &snapshot.field, &values) == Control::Stop {
                break;
            }
        }
        tracker.finish()
    }
}

/// `½ d3 lambda²`.
pub fn virial_slope_prediction(d3: f64, lambda: f64) -> f64 {
    0.5 * d3 * lambda * lambda
}

/// Streaming decomposition of an evolution; stops the run at the first tube exit, meaning
/// either a failed decomposition or an orbital distance above the tube radius.
pub struct Tracker<'a> {
    modulation: &'a Modulation,
    samples: Vec<TrackedSample>,
    guess: (f64, f64),
    tube_exit: Option<(f64, String)>,
    first_error: Option<Error>,
    keep_going_after_exit: bool,
}

impl<'a> Tracker<'a> {
    pub fn new(modulation: &'a Modulation) -> Self {
        Self {
            modulation,
            samples: Vec::new(),
            guess: (0.0, 0.0),
            tube_exit: None,
            first_error: None,
            keep_going_after_exit: false,
        }
    }

    /// Warm start for the first sample.
    pub fn with_initial_guess(mut self, theta: f64, lambda: f64) -> Self {
        self.guess = (theta, lambda);
        self
    }

    /// Let the evolution continue past the tube exit (tracking stays stopped).
    pub fn continue_after_exit(mut self) -> Self {
        self.keep_going_after_exit = true;
        self
    }

    pub fn samples(&self) -> &[TrackedSample] {
        &self.samples
    }

    pub fn tube_exit(&self) -> Option<&(f64, String)> {
        self.tube_exit.as_ref()
    }

    /// Builds the report; fails only if not even the first sample could be decomposed.
    pub fn finish(self) -> Result<TrackReport> {
        if let Some(err) = self.first_error {
            return Err(err);
        }
        Ok(TrackReport::new(self.samples, self.tube_exit, self.modulation))
    }
}

impl Observer for Tracker<'_> {
    fn observe(&mut self, t: f64, u: &ComplexField, values: &FunctionalValues) -> Control {
        if self.tube_exit.is_some() || self.first_error.is_some() {
            return if self.keep_going_after_exit { Control::Continue } else { Control::Stop };
        }
        match self.modulation.decompose(u, self.guess) {
            Ok(state) => {
                self.guess = (state.theta, state.lambda);
                let virial = self.modulation.virial(&state).unwrap_or(f64::NAN);
                let orbital = orbital_distance(u, self.modulation.profiles.q()).unwrap_or(f64::NAN);
                self.samples.push(TrackedSample {
                    t,
                    theta: state.theta,
                    lambda: state.lambda,
                    eps_h1: state.eps_h1,
                    eps_l2: state.eps_l2,
                    eps_q_pairing: state.eps_q_pairing,
                    orth_residuals: state.orth_residuals,
                    virial,
                    virial_bound: self.modulation.virial_bound(&state),
                    orbital_distance: orbital,
                    eps_mass_ratio: self.modulation.eps_mass_pairing_check(&state),
                    mass: values.mass,
                    energy: values.energy,
                });
                if orbital > self.modulation.tube_radius {
                    self.tube_exit = Some((
                        t,
                        format!(
                            "orbital distance {orbital:e} exceeds the tube radius {:e}",
                            self.modulation.tube_radius
                        ),
                    ));
                    return if self.keep_going_after_exit { Control::Continue } else { Control::Stop };
                }
                Control::Continue
            }
            Err(err) => {
                if self.samples.is_empty() {
                    self.first_error = Some(err);
                } else {
                    self.tube_exit = Some((t, err.to_string()));
                }
                if self.keep_going_after_exit {
                    Control::Continue
                } else {
                    Control::Stop
                }
            }
        }
    }
}

/// Outcome of tracking one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackReport {
    pub samples: Vec<TrackedSample>,
    pub records: Vec<VirialRecord>,
    /// First sample time at which the decomposition failed.
    pub tube_exit_time: Option<f64>,
    pub tube_exit_reason: Option<String>,
    pub omega: f64,
}

impl TrackReport {
    fn new(samples: Vec<TrackedSample>, exit: Option<(f64, String)>, modulation: &Modulation) -> Self {
        let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
        let slope =
            |f: &dyn Fn(&TrackedSample) -> f64| finite_difference(&t, &samples.iter().map(f).collect::<Vec<_>>());
        let di = slope(&|s| s.virial);
        let dl = slope(&|s| s.lambda);
        let dth = slope(&|s| s.theta);
        let omega = modulation.omega();
        let records = samples
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let scale = s.lambda.abs() + s.eps_h1;
                let num = dl[k].abs() + (dth[k] + omega).abs();
                VirialRecord {
                    t: s.t,
                    i: s.virial,
                    di_dt_fd: di[k],
                    predicted_slope: modulation.predicted_slope(s.lambda),
                    lambda: s.lambda,
                    eps_h1: s.eps_h1,
                    lambda_t_fd: dl[k],
                    theta_t_fd: dth[k],
                    paradyn_ratio: if scale > 0.0 { num / scale } else { 0.0 },
                }
            })
            .collect();
        let (tube_exit_time, tube_exit_reason) = match exit {
            Some((t, reason)) => (Some(t), Some(reason)),
            None => (None, None),
        };
        Self { samples, records, tube_exit_time, tube_exit_reason, omega }
    }

    /// Whether `lambda(t) >= lambda0 / 2` on every tracked sample.
    pub fn lambda_persists(&self, lambda0: f64) -> bool {
        self.samples.iter().all(|s| s.lambda >= 0.5 * lambda0)
    }

    /// Fraction of consecutive sample pairs over which `I` strictly decreases.
    pub fn virial_decreasing_fraction(&self) -> f64 {
        let pairs = self.samples.windows(2).count();
        if pairs == 0 {
            return 1.0;
        }
        self.samples.windows(2).filter(|w| w[1].virial < w[0].virial).count() as f64 / pairs as f64
    }

    /// Fraction of samples in the window `‖eps‖_{H¹} <= lambda` where the finite-difference
    /// slope of `I` has the sign of the predicted slope, with the window size.
    pub fn slope_sign_agreement(&self) -> (f64, usize) {
        let window: Vec<&VirialRecord> =
            self.records.iter().filter(|r| r.lambda != 0.0 && r.eps_h1 <= r.lambda.abs()).collect();
        if window.is_empty() {
            return (0.0, 0);
        }
        let agree = window.iter().filter(|r| r.di_dt_fd.signum() == r.predicted_slope.signum()).count();
        (agree as f64 / window.len() as f64, window.len())
    }

    /// `max_t d(t) / d(0)` for the orbital distance.
    pub fn distance_growth(&self) -> f64 {
        let Some(first) = self.samples.first() else { return f64::NAN };
        let max = self.samples.iter().map(|s| s.orbital_distance).fold(0.0, f64::max);
        max / first.orbital_distance
    }

    pub fn max_eps_mass_ratio(&self) -> f64 {
        self.samples.iter().map(|s| s.eps_mass_ratio).fold(0.0, f64::max)
    }

    pub fn max_paradyn_ratio(&self) -> f64 {
        self.records.iter().map(|r| r.paradyn_ratio).fold(0.0, f64::max)
    }
}

/// Centred differences in the interior, one-sided at the ends.
pub fn finite_difference(t: &[f64], f: &[f64]) -> Vec<f64> {
    let n = t.len();
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|k| {
                let (lo, hi) = if k == 0 {
                    (0, 1)
                } else if k == n - 1 {
                    (n - 2, n - 1)
                } else {
                    (k - 1, k + 1)
                };
                (f[hi] - f[lo]) / (t[hi] - t[lo])
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grid::Grid;
    use crate::soliton::{critical_frequency, d_third_closed};

    fn setup(n: usize) -> Modulation {
        let params = ModelParams::new(7.0, 1.0).unwrap();
        let critical = critical_frequency(&params).unwrap();
        let grid = Grid::new(40.0, n).unwrap();
        let profiles = ProfileSet::closed_form(&params, critical.omega_star, &grid).unwrap();
        Modulation::new(profiles, d_third_closed(&params, &critical))
    }

    #[test]
    fn profile_is_a_fixed_point() {
        let m = setup(4001);
        let q = m.profiles().q().to_complex();
        let s = m.decompose(&q, (0.0, 0.0)).unwrap();
        assert!(s.theta.abs() < 1e-12 && s.lambda.abs() < 1e-12 && s.eps_h1 < 1e-10, "{s:?}");
    }

    #[test]
    fn constructed_preimage_is_recovered() {
        let m = setup(4001);
        let (alpha, lambda) = (0.3, 0.02);
        let base = m.profiles().combination(lambda, m.rho(lambda));
        let u = base.rotated(-alpha);
        let s = m.decompose(&u, (0.0, 0.0)).unwrap();
        assert!((s.theta - alpha).abs() < 1e-9 && (s.lambda - lambda).abs() < 1e-9, "{} {}", s.theta, s.lambda);
        let back = m.reconstruct(&s);
        assert!(h1_norm(&back.sub(&u).unwrap()) < 1e-12);
    }

    #[test]
    fn orthogonal_perturbation_matches_grid_search() {
        let m = setup(2001);
        let grid = *m.profiles().grid();
        let (alpha, lambda) = (0.3, 0.02);
        // A bump made orthogonal to iQ (it is real) and to phi.
        let bump = grid.sample(|x| 1e-3 * (-(x - 1.0).powi(2)).exp());
        let phi = m.profiles().phi();
        let coef = inner_product(&bump, phi).unwrap() / m.profiles().phi_norm2();
        let eps = bump.combine(1.0, phi, -coef).unwrap().to_complex();
        let u = m.profiles().combination(lambda, m.rho(lambda)).add(&eps).unwrap().rotated(-alpha);
        let s = m.decompose(&u, (0.0, 0.0)).unwrap();
        assert!(s.orth_residuals.iter().all(|r| r.abs() < 1e-10 * m.profiles().q_norm2().sqrt() * s.eps_l2.max(1e-3)));

        // Coarse scan then local refinement of the residual norm.
        let residual = |theta: f64, l: f64| {
            let e = m.remainder(&u, theta, l).unwrap();
            let iq = m.profiles().q().to_complex().scaled(Complex64::new(0.0, 1.0));
            inner_product(&e, &iq).unwrap().hypot(inner_product(&e, phi).unwrap())
        };
        let mut best = (0.0, 0.0, f64::INFINITY);
        let mut step = 1e-2;
        let mut center = (alpha, lambda);
        for _ in 0..8 {
            for i in -10..=10 {
                for j in -10..=10 {
                    let th = center.0 + i as f64 * step;
                    let l = center.1 + j as f64 * step * 0.1;
                    let r = residual(th, l);
                    if r < best.2 {
                        best = (th, l, r);
                    }
                }
            }
            center = (best.0, best.1);
            step *= 0.2;
        }
        assert!((s.theta - best.0).abs() < 1e-6 && (s.lambda - best.1).abs() < 1e-6, "{s:?} vs {best:?}");
        assert!((s.theta - alpha).abs() < 1e-3 && (s.lambda - lambda).abs() < 1e-3);
    }

    #[test]
    fn far_states_fail_with_decomposition_failure() {
        let m = setup(2001);
        let u = m.profiles().q().to_complex().scaled(Complex64::new(3.0, 0.0));
        assert!(matches!(m.decompose(&u, (0.0, 0.0)), Err(Error::DecompositionFailure(_))));
    }

    #[test]
    fn orbital_distance_examples() {
        let m = setup(4001);
        let q = m.profiles().q();
        let rotated = q.to_complex().rotated(1.234);
        assert!(orbital_distance(&rotated, q).unwrap() < 1e-13);
        let doubled = q.to_complex().scaled(Complex64::new(2.0, 0.0));
        let d = orbital_distance(&doubled, q).unwrap();
        assert!((d - h1_norm(q)).abs() < 1e-12 * d);
        let raw = doubled.sub(&q.to_complex()).unwrap();
        assert!(d <= h1_norm(&raw) + 1e-15);
    }

    #[test]
    fn virial_examples() {
        let m = setup(4001);
        let grid = *m.profiles().grid();
        let phi = m.profiles().phi();
        let zero = ComplexField::zeros(grid);
        assert_eq!(m.virial_of(0.3, &zero).unwrap(), 0.0);
        let i_phi = phi.to_complex().scaled(Complex64::new(0.0, 1.0));
        let c = m.profiles().phi_norm2();
        assert!((m.virial_of(0.0, &i_phi).unwrap() + c).abs() < 1e-12 * c);
        let amp = 0.7;
        let lambda = 0.05;
        let icq = m.profiles().q().to_complex().scaled(Complex64::new(0.0, amp));
        let expected = amp * lambda * c - amp * m.profiles().q_phi();
        assert!((m.virial_of(lambda, &icq).unwrap() - expected).abs() < 1e-12 * c);
    }

    #[test]
    fn slope_prediction_is_non_positive() {
        let m = setup(2001);
        assert_eq!(m.predicted_slope(0.0), 0.0);
        assert!(m.predicted_slope(0.02) < 0.0 && m.predicted_slope(-0.02) < 0.0);
        assert!((m.predicted_slope(0.02) - 0.5 * m.d3() * 4e-4).abs() < 1e-18);
    }

    #[test]
    fn mass_identity_matches_direct_pairing() {
        let m = setup(4001);
        let grid = *m.profiles().grid();
        let q = m.profiles().q();
        let phi = m.profiles().phi();
        let lambda = 0.03;
        let rho = m.rho(lambda);
        // eps0 orthogonal to phi and iQ, then a Q component s fixed by M(u) = M(Q).
        let bump = grid.sample_complex(|x| Complex64::new(2e-3 * (-(x + 0.5).powi(2)).exp(), 0.0));
        let coef = inner_product(&bump, phi).unwrap() / m.profiles().phi_norm2();
        let eps0 = bump.sub(&phi.to_complex().scaled(Complex64::new(coef, 0.0))).unwrap();
        let base = m.profiles().combination(lambda, rho);
        let target = m.profiles().q_norm2();
        let mass_of = |s: f64| {
            let u = base.add(&eps0).unwrap().add(&q.to_complex().scaled(Complex64::new(s, 0.0))).unwrap();
            l2_norm(&u).powi(2) - target
        };
        let s = crate::numerics::bracketed_root(mass_of, -0.1, 0.1, 1e-16).unwrap();
        let eps = eps0.add(&q.to_complex().scaled(Complex64::new(s, 0.0))).unwrap();
        let state = ModulationState {
            theta: 0.0,
            lambda,
            rho,
            eps_h1: h1_norm(&eps),
            eps_l2: l2_norm(&eps),
            eps_q_pairing: inner_product(&eps, q).unwrap(),
            orth_residuals: [0.0; 2],
            eps,
            iterations: 0,
        };
        let predicted = m.eps_q_from_mass_identity(&state).unwrap();
        assert!(
            (predicted - state.eps_q_pairing).abs() < 1e-8 * state.eps_q_pairing.abs() + 1e-14,
            "{predicted} vs {}",
            state.eps_q_pairing
        );
        let zero = ModulationState {
            eps: ComplexField::zeros(grid),
            eps_h1: 0.0,
            eps_l2: 0.0,
            eps_q_pairing: 0.0,
            lambda: 0.0,
            rho: 0.0,
            ..state
        };
        assert_eq!(m.eps_mass_pairing_check(&zero), 0.0);
    }

    #[test]
    fn finite_difference_is_exact_for_quadratics_in_the_interior() {
        let t: Vec<f64> = (0..6).map(|k| k as f64 * 0.5).collect();
        let f: Vec<f64> = t.iter().map(|x| x * x).collect();
        let d = finite_difference(&t, &f);
        for k in 1..5 {
            assert!((d[k] - 2.0 * t[k]).abs() < 1e-12);
        }
        assert!((d[0] - 0.5).abs() < 1e-12 && (d[5] - 4.5).abs() < 1e-12);
    }
}
