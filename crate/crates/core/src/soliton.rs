//! The explicit soliton family `Q_omega`, its frequency derivative `phi_omega`,
//! the degenerate critical frequency `Omega(p, gamma)` and the derivatives of
//! the landscape `d(omega) = S_omega(Q_omega)`.
//!
//! The profile is
//!
//! ```text
//! Q(x) = [ (p+1) omega / 2 * sech^2( (p-1) sqrt(omega) |x| / 2 + atanh(gamma / (2 sqrt(omega))) ) ]^(1/(p-1))
//! ```
//!
//! and the mass has the closed form `m(omega) = C(p, gamma) h(lambda) q(lambda)`
//! with `lambda = 2 sqrt(omega) / gamma`, `k = 4/(p-1)`,
//! `h(lambda) = lambda^(k-1)`, `q(lambda) = ∫_{atanh(1/lambda)}^∞ sech^k` and
//! `C = ((p+1)/8)^(2/(p-1)) k gamma^(k-1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals;
use crate::numerics::grid::{inner_product, Grid, Resolution};
use crate::numerics::quad::sech_power_tail;
use crate::numerics::roots::bracketed_root;

/// Absolute tolerance of the sech-power integrals.
pub const QUAD_TOL: f64 = 1e-12;
/// Bracket-width tolerance of the critical-frequency solve.
pub const ROOT_TOL: f64 = 1e-12;
/// Maximal relative spread tolerated between the three third-derivative routes.
pub const D3_ROUTE_TOL: f64 = 1e-4;
/// Relative finite-difference step for first derivatives of the mass.
pub const FD_STEP_FIRST: f64 = 1e-4;
/// Relative finite-difference step for second derivatives of the mass.
pub const FD_STEP_SECOND: f64 = 1e-3;
/// Default bound on `|lambda|` for the exact mass-restoring coefficient.
pub const DEFAULT_LAMBDA_MAX: f64 = 0.2;

/// The model exponent `p` and delta strength `gamma` (focusing case).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    p: f64,
    gamma: f64,
}

impl ModelParams {
    pub fn new(p: f64, gamma: f64) -> Result<Self> {
        let mut problems = Vec::new();
        if !(p.is_finite() && p > 1.0) {
            problems.push(format!("p must be a finite number > 1, got {p}"));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            problems.push(format!("gamma must be a finite number > 0, got {gamma}"));
        }
        if problems.is_empty() {
            Ok(Self { p, gamma })
        } else {
            Err(Error::InvalidParameter(problems.join("; ")))
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// The sech exponent `k = 4/(p-1)` of the mass integrand.
    pub fn k(&self) -> f64 {
        4.0 / (self.p - 1.0)
    }

    /// Edge of the existence range, `gamma^2 / 4`.
    pub fn omega_min(&self) -> f64 {
        0.25 * self.gamma * self.gamma
    }

    pub fn check_omega(&self, omega: f64) -> Result<()> {
        if omega.is_finite() && 4.0 * omega > self.gamma * self.gamma {
            Ok(())
        } else {
            Err(Error::NoSolitaryWave { omega, gamma: self.gamma })
        }
    }

    pub fn require_supercritical(&self) -> Result<()> {
        if self.p > 5.0 {
            Ok(())
        } else {
            Err(Error::StableRange { p: self.p })
        }
    }

    /// `C(p, gamma) = ((p+1)/8)^(2/(p-1)) * k * gamma^(k-1)`.
    pub fn mass_constant(&self) -> f64 {
        let k = self.k();
        ((self.p + 1.0) / 8.0).powf(2.0 / (self.p - 1.0)) * k * self.gamma.powf(k - 1.0)
    }

    /// `lambda = 2 sqrt(omega) / gamma`.
    pub fn lambda_of(&self, omega: f64) -> f64 {
        2.0 * omega.sqrt() / self.gamma
    }
}

/// Which side of a point a one-sided derivative is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Closed-form profile at a fixed frequency, with the frequency-independent parts precomputed.
#[derive(Debug, Clone, Copy)]
pub struct Profile {
    p: f64,
    omega: f64,
    sqrt_omega: f64,
    log_amplitude: f64,
    slope: f64,
    z0: f64,
    dz0_domega: f64,
}

impl Profile {
    pub fn new(params: &ModelParams, omega: f64) -> Result<Self> {
        params.check_omega(omega)?;
        let p = params.p();
        let gamma = params.gamma();
        let sqrt_omega = omega.sqrt();
        let ratio = gamma / (2.0 * sqrt_omega);
        Ok(Self {
            p,
            omega,
            sqrt_omega,
            log_amplitude: ((p + 1.0) * omega / 2.0).ln(),
            slope: (p - 1.0) * sqrt_omega / 2.0,
            z0: ratio.atanh(),
            dz0_domega: -(gamma / (4.0 * omega * sqrt_omega)) / (1.0 - ratio * ratio),
        })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    fn z(&self, x: f64) -> f64 {
        self.slope * x.abs() + self.z0
    }

    fn dz_domega(&self, x: f64) -> f64 {
        (self.p - 1.0) * x.abs() / (4.0 * self.sqrt_omega) + self.dz0_domega
    }

    /// `Q_omega(x)`.
    pub fn value(&self, x: f64) -> f64 {
        let z = self.z(x);
        let log_sech = std::f64::consts::LN_2 - z - (-2.0 * z).exp().ln_1p();
        ((self.log_amplitude + 2.0 * log_sech) / (self.p - 1.0)).exp()
    }

    /// `(1/omega - 2 tanh(z) dz/domega) / (p-1)`, the logarithmic frequency derivative.
    fn log_derivative(&self, x: f64) -> f64 {
        (1.0 / self.omega - 2.0 * self.z(x).tanh() * self.dz_domega(x)) / (self.p - 1.0)
    }

    /// `phi_omega(x) = dQ_omega/domega (x)`.
    pub fn domega(&self, x: f64) -> f64 {
        self.value(x) * self.log_derivative(x)
    }

    /// One-sided spatial derivative `Q'(x±)`.
    pub fn dx(&self, x: f64, side: Side) -> f64 {
        let sign = direction(x, side);
        -sign * self.sqrt_omega * self.z(x).tanh() * self.value(x)
    }

    /// One-sided spatial derivative `phi'(x±)`.
    pub fn domega_dx(&self, x: f64, side: Side) -> f64 {
        let sign = direction(x, side);
        let z = self.z(x);
        let t = z.tanh();
        let b = 1.0 / self.omega - 2.0 * t * self.dz_domega(x);
        let db =
            -2.0 * (1.0 - t * t) * self.slope * self.dz_domega(x) - 2.0 * t * (self.p - 1.0) / (4.0 * self.sqrt_omega);
        let q = self.value(x);
        let dq = -self.sqrt_omega * t * q;
        sign * (dq * b + q * db) / (self.p - 1.0)
    }
}

fn direction(x: f64, side: Side) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else if side == Side::Right {
        1.0
    } else {
        -1.0
    }
}

pub fn profile(params: &ModelParams, omega: f64, x: f64) -> Result<f64> {
    Ok(Profile::new(params, omega)?.value(x))
}

pub fn profile_domega(params: &ModelParams, omega: f64, x: f64) -> Result<f64> {
    Ok(Profile::new(params, omega)?.domega(x))
}

/// Solution of the critical-frequency equation in the variable `s = gamma / (2 sqrt(Omega))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalData {
    pub s_star: f64,
    pub omega_star: f64,
}

/// Residual of `(p-5)/(p-1) ∫_{atanh s}^∞ sech^k - s (1 - s^2)^{-(p-3)/(p-1)}`.
///
/// The equation contains no `gamma`, which makes `Omega` scale exactly like `gamma^2`.
pub fn omega_equation_residual(p: f64, s: f64) -> Result<f64> {
    let k = 4.0 / (p - 1.0);
    let integral = sech_power_tail(k, s.atanh(), QUAD_TOL)?;
    Ok((p - 5.0) / (p - 1.0) * integral - s * (1.0 - s * s).powf(-(p - 3.0) / (p - 1.0)))
}

pub fn critical_frequency(params: &ModelParams) -> Result<CriticalData> {
    params.require_supercritical()?;
    let s_star = solve_s_equation(params.p())?;
    let gamma = params.gamma();
    Ok(CriticalData { s_star, omega_star: gamma * gamma / (4.0 * s_star * s_star) })
}

fn solve_s_equation(p: f64) -> Result<f64> {
    let mut failure = None;
    let root = bracketed_root(
        |s| match omega_equation_residual(p, s) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        1e-9,
        1.0 - 1e-9,
        ROOT_TOL,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    root
}

/// Intermediate quantities of the closed-form mass, and their `lambda`-derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassTerms {
    pub lambda: f64,
    /// `C(p, gamma)`.
    pub c: f64,
    pub h: f64,
    pub q: f64,
    /// `g = C h q = m(omega)`.
    pub g: f64,
    pub dh: f64,
    pub dq: f64,
    pub dg: f64,
    pub d2h: f64,
    pub d2q: f64,
    pub d2g: f64,
}

impl MassTerms {
    pub fn evaluate(params: &ModelParams, omega: f64) -> Result<Self> {
        params.check_omega(omega)?;
        let k = params.k();
        let lambda = params.lambda_of(omega);
        let c = params.mass_constant();
        let q = sech_power_tail(k, (1.0 / lambda).atanh(), QUAD_TOL)?;
        let l2m1 = lambda * lambda - 1.0;
        let h = lambda.powf(k - 1.0);
        let dh = (k - 1.0) * lambda.powf(k - 2.0);
        let d2h = (k - 1.0) * (k - 2.0) * lambda.powf(k - 3.0);
        let dq = l2m1.powf(0.5 * k - 1.0) * lambda.powf(-k);
        let d2q = (0.5 * k - 1.0) * l2m1.powf(0.5 * k - 2.0) * 2.0 * lambda.powf(1.0 - k)
            - k * l2m1.powf(0.5 * k - 1.0) * lambda.powf(-k - 1.0);
        Ok(Self {
            lambda,
            c,
            h,
            q,
            g: c * h * q,
            dh,
            dq,
            dg: c * (dh * q + h * dq),
            d2h,
            d2q,
            d2g: c * (d2h * q + 2.0 * dh * dq + h * d2q),
        })
    }

    /// `m'(omega)` from `g'(lambda) = (lambda gamma^2 / 2) m'(omega)`.
    pub fn dmass(&self, gamma: f64) -> f64 {
        2.0 * self.dg / (self.lambda * gamma * gamma)
    }

    /// `m''(omega)` from `g''(lambda) = (gamma^2/2) m'(omega) + (lambda^2 gamma^4 / 4) m''(omega)`.
    pub fn d2mass(&self, gamma: f64) -> f64 {
        let g2 = gamma * gamma;
        4.0 * (self.d2g - 0.5 * g2 * self.dmass(gamma)) / (self.lambda * self.lambda * g2 * g2)
    }
}

/// `m(omega) = M(Q_omega) = C h(lambda) q(lambda)`.
pub fn mass_closed_form(params: &ModelParams, omega: f64) -> Result<f64> {
    Ok(MassTerms::evaluate(params, omega)?.g)
}

/// Which computation routes `d_derivatives` evaluates for `d''`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DerivativeMode {
    Closed,
    FiniteDifference,
    Both,
}

/// Landscape scalars at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeReport {
    pub omega: f64,
    pub mass: f64,
    /// `d'(omega) = m(omega)`.
    pub d1: f64,
    /// `d''(omega) = m'(omega)`; the closed form when it was evaluated.
    pub d2: f64,
    /// `d'''(omega)`, filled in only at the critical frequency.
    pub d3: Option<f64>,
    pub d2_closed: Option<f64>,
    pub d2_fd: Option<f64>,
    /// `|closed - fd| / max(|closed|, |fd|, m/omega)`; zero unless both routes ran.
    pub route_disagreement: f64,
    pub mass_terms: MassTerms,
}

pub fn d_derivatives(params: &ModelParams, omega: f64, mode: DerivativeMode) -> Result<LandscapeReport> {
    let mass_terms = MassTerms::evaluate(params, omega)?;
    let mass = mass_terms.g;
    let d2_closed = match mode {
        DerivativeMode::Closed | DerivativeMode::Both => Some(mass_terms.dmass(params.gamma())),
        DerivativeMode::FiniteDifference => None,
    };
    let d2_fd = match mode {
        DerivativeMode::FiniteDifference | DerivativeMode::Both => {
            let delta = FD_STEP_FIRST * omega;
            check_step(params, omega, delta)?;
            let plus = mass_closed_form(params, omega + delta)?;
            let minus = mass_closed_form(params, omega - delta)?;
            Some((plus - minus) / (2.0 * delta))
        }
        DerivativeMode::Closed => None,
    };
    let route_disagreement = match (d2_closed, d2_fd) {
        (Some(a), Some(b)) => (a - b).abs() / a.abs().max(b.abs()).max(mass / omega),
        _ => 0.0,
    };
    Ok(LandscapeReport {
        omega,
        mass,
        d1: mass,
        d2: d2_closed.or(d2_fd).expect("at least one route runs"),
        d3: None,
        d2_closed,
        d2_fd,
        route_disagreement,
        mass_terms,
    })
}

fn check_step(params: &ModelParams, omega: f64, delta: f64) -> Result<()> {
    if omega - delta > params.omega_min() && delta > 0.0 {
        Ok(())
    } else {
        Err(Error::StepUnderflow { omega, step: delta })
    }
}

/// The three independent evaluations of `d'''(Omega)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThirdDerivativeRoutes {
    pub omega: f64,
    /// Closed form `4 g''(lambda*) / (lambda*^2 gamma^4)` with `g''` from the explicit power law.
    pub closed: f64,
    /// `S'''(Q)(phi, phi, phi) + 3 <phi, phi>` on the grid, Richardson-extrapolated over `h` and `h/2`.
    pub trilinear: f64,
    /// Second central difference of `m(omega)`.
    pub finite_difference: f64,
    /// Largest pairwise difference relative to `|closed|`.
    pub spread: f64,
}

/// `g''(lambda*) = C (6 - 2p)/(p - 1) (lambda*^2 - 1)^(2/(p-1) - 2)` at the critical point.
pub fn d_third_closed(params: &ModelParams, critical: &CriticalData) -> f64 {
    let p = params.p();
    let gamma = params.gamma();
    let lambda = 1.0 / critical.s_star;
    let g2 = params.mass_constant() * (6.0 - 2.0 * p) / (p - 1.0) * (lambda * lambda - 1.0).powf(2.0 / (p - 1.0) - 2.0);
    4.0 * g2 / (lambda * lambda * gamma.powi(4))
}

/// Grid-based `S'''(Q)(phi,phi,phi) + 3 <phi,phi>` with closed-form samples on `grid`.
pub fn d_third_trilinear_on(params: &ModelParams, omega: f64, grid: &Grid) -> Result<f64> {
    let profile = Profile::new(params, omega)?;
    let q = grid.sample(|x| profile.value(x));
    let phi = grid.sample(|x| profile.domega(x));
    Ok(functionals::trilinear_real(params, &q, &phi)? + 3.0 * inner_product(&phi, &phi)?)
}

pub fn d_third_routes(params: &ModelParams) -> Result<ThirdDerivativeRoutes> {
    let critical = critical_frequency(params)?;
    let omega = critical.omega_star;
    let closed = d_third_closed(params, &critical);

    let coarse = Grid::for_frequency(params.gamma(), omega, Resolution::Standard)?;
    let fine = Grid::new(coarse.half_width(), 2 * (coarse.n() - 1) + 1)?;
    let t_coarse = d_third_trilinear_on(params, omega, &coarse)?;
    let t_fine = d_third_trilinear_on(params, omega, &fine)?;
    let trilinear = (4.0 * t_fine - t_coarse) / 3.0;

    let delta = FD_STEP_SECOND * omega;
    check_step(params, omega, delta)?;
    let m_plus = mass_closed_form(params, omega + delta)?;
    let m_0 = mass_closed_form(params, omega)?;
    let m_minus = mass_closed_form(params, omega - delta)?;
    let finite_difference = (m_plus - 2.0 * m_0 + m_minus) / (delta * delta);

    let values = [closed, trilinear, finite_difference];
    let mut spread: f64 = 0.0;
    for i in 0..3 {
        for j in i + 1..3 {
            spread = spread.max((values[i] - values[j]).abs());
        }
    }
    Ok(ThirdDerivativeRoutes { omega, closed, trilinear, finite_difference, spread: spread / closed.abs() })
}

/// `d'''(Omega)`, after checking that the three routes agree to [`D3_ROUTE_TOL`].
pub fn d_third_at_critical(params: &ModelParams) -> Result<f64> {
    let routes = d_third_routes(params)?;
    if routes.spread > D3_ROUTE_TOL {
        return Err(Error::RouteDisagreement { spread: routes.spread, tol: D3_ROUTE_TOL });
    }
    Ok(routes.closed)
}

/// Landscape report at the critical frequency with `d'''` populated.
pub fn landscape_at_critical(params: &ModelParams) -> Result<(CriticalData, LandscapeReport, ThirdDerivativeRoutes)> {
    let critical = critical_frequency(params)?;
    let mut report = d_derivatives(params, critical.omega_star, DerivativeMode::Both)?;
    let routes = d_third_routes(params)?;
    if routes.spread > D3_ROUTE_TOL {
        return Err(Error::RouteDisagreement { spread: routes.spread, tol: D3_ROUTE_TOL });
    }
    report.d3 = Some(routes.closed);
    Ok((critical, report, routes))
}

/// Norm coefficients `a = ‖Q‖²`, `b = <Q, phi>`, `c = ‖phi‖²` on a fixed grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// `rho(lambda) = -(‖phi‖² / (2 ‖Q‖²)) lambda²`.
pub fn rho_of_lambda(coefficients: &NormCoefficients, lambda: f64) -> f64 {
    -(coefficients.c / (2.0 * coefficients.a)) * lambda * lambda
}

/// Exact mass-restoring coefficient: the root nearest zero of
/// `(1+rho)^2 a + 2 (1+rho) lambda b + lambda^2 c = a`.
pub fn rho_tilde(coefficients: &NormCoefficients, lambda: f64, lambda_max: f64) -> Result<f64> {
    if !(lambda.abs() <= lambda_max) {
        return Err(Error::PerturbationTooLarge { lambda });
    }
    let NormCoefficients { a, b, c } = *coefficients;
    let discriminant = a * a + lambda * lambda * (b * b - a * c);
    if !(discriminant > 0.0) {
        return Err(Error::PerturbationTooLarge { lambda });
    }
    // (sqrt(D) - a) rewritten as lambda^2 (b^2 - a c) / (sqrt(D) + a) to avoid cancellation.
    let root = discriminant.sqrt();
    Ok((-lambda * b + lambda * lambda * (b * b - a * c) / (root + a)) / a)
}
