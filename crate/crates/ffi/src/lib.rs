//! C ABI over `dnls-core`.
//!
//! Every entry point returns a [`DnlsStatus`] and writes results through caller-owned
//! pointers. Models and solvers are opaque handles released with their `_free`
//! function. On failure the message of the most recent error on the calling thread
//! is available through [`dnls_last_error_message`]. Panics never cross the boundary;
//! they are reported as [`DnlsStatus::Panic`].
//!
//! Pointer arguments must be null or valid for the access the function documents;
//! every function checks for null before use.

#![allow(clippy::not_unsafe_ptr_arg_deref)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dnls_core::evolution::{evolution_grid, Propagator};
use dnls_core::functionals::{self, Nonlinearity};
use dnls_core::numerics::grid::{ComplexField, Grid, Resolution};
use dnls_core::profiles::ProfileSet;
use dnls_core::soliton::{
    critical_frequency, d_derivatives, d_third_at_critical, DerivativeMode, ModelParams, Profile, DEFAULT_LAMBDA_MAX,
};
use dnls_core::spectrum::{coercivity_constant, spectral_structure, ALL_CONSTRAINTS};
use dnls_core::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DnlsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The parameters are valid numbers but outside the model's domain, such as `p <= 5`
    /// for the critical frequency or `omega <= gamma^2 / 4`.
    DomainError = 3,
    NumericalFailure = 4,
    Panic = 5,
}

/// Model parameters `(p, gamma)`.
pub struct DnlsModel {
    params: ModelParams,
}

/// Split-step solver holding its current state.
pub struct DnlsSolver {
    params: ModelParams,
    omega: f64,
    propagator: Propagator,
    state: ComplexField,
    time: f64,
    dt: f64,
}

/// Landscape scalars at one frequency.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DnlsLandscape {
    pub omega: f64,
    pub mass: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Spectral summary at one frequency.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DnlsSpectrum {
    pub n_negative: usize,
    pub lambda_neg: f64,
    pub kernel_residual: f64,
    pub chi_phi_cosine: f64,
    pub kappa: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(sanitized).ok());
}

fn status_of(err: &Error) -> DnlsStatus {
    match err {
        Error::NoSolitaryWave { .. } | Error::StableRange { .. } | Error::PerturbationTooLarge { .. } => {
            DnlsStatus::DomainError
        }
        e if e.is_invalid_input() => DnlsStatus::InvalidArgument,
        _ => DnlsStatus::NumericalFailure,
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> DnlsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DnlsStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_last_error(format!("null pointer passed for `{name}`"));
            DnlsStatus::NullPointer
        }
        Ok(Err(Failure::Core(err))) => {
            set_last_error(err.to_string());
            status_of(&err)
        }
        Err(payload) => {
            let text = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {text}"));
            DnlsStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    // SAFETY: the caller guarantees that a non-null pointer refers to a live value.
    unsafe { p.as_ref() }.ok_or(Failure::Null(name))
}

fn non_null_mut<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    // SAFETY: as above, with exclusive access for the duration of the call.
    unsafe { p.as_mut() }.ok_or(Failure::Null(name))
}

fn slice<'a>(p: *const f64, len: usize, name: &'static str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    // SAFETY: the caller guarantees `len` readable elements.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn slice_mut<'a>(p: *mut f64, len: usize, name: &'static str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    // SAFETY: the caller guarantees `len` writable elements not aliased by other arguments.
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

/// Copies the last error message of this thread into `buf` (NUL-terminated, truncated
/// to `len - 1` bytes) and returns the full message length without the terminator.
/// Returns 0 when no error has been recorded. `buf` may be null to query the length.
#[no_mangle]
pub extern "C" fn dnls_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let slot = slot.borrow();
        let Some(message) = slot.as_ref() else { return 0 };
        let bytes = message.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            // SAFETY: the caller provides `len` writable bytes at `buf`.
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Creates a model for `i u_t + u_xx + gamma delta(x) u + |u|^(p-1) u = 0`.
#[no_mangle]
pub extern "C" fn dnls_model_new(p: f64, gamma: f64, out: *mut *mut DnlsModel) -> DnlsStatus {
    guard(|| {
        let out = non_null_mut(out, "out")?;
        let params = ModelParams::new(p, gamma)?;
        *out = Box::into_raw(Box::new(DnlsModel { params }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
#[no_mangle]
pub extern "C" fn dnls_model_free(model: *mut DnlsModel) {
    if !model.is_null() {
        // SAFETY: `model` came from `dnls_model_new` and is freed once.
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Degenerate critical frequency `Omega(p, gamma)`; requires `p > 5`.
#[no_mangle]
pub extern "C" fn dnls_critical_frequency(model: *const DnlsModel, omega_out: *mut f64) -> DnlsStatus {
    guard(|| {
        let model = non_null(model, "model")?;
        let out = non_null_mut(omega_out, "omega_out")?;
        *out = critical_frequency(&model.params)?.omega_star;
        Ok(())
    })
}

/// `d'''(Omega)` from the closed form, cross-checked against the other two routes.
#[no_mangle]
pub extern "C" fn dnls_d_third(model: *const DnlsModel, out: *mut f64) -> DnlsStatus {
    guard(|| {
        let model = non_null(model, "model")?;
        let out = non_null_mut(out, "out")?;
        *out = d_third_at_critical(&model.params)?;
        Ok(())
    })
}

/// Closed-form mass `m(omega) = ½ ∫ Q_omega²`.
#[no_mangle]
pub extern "C" fn dnls_mass(model: *const DnlsModel, omega: f64, out: *mut f64) -> DnlsStatus {
    guard(|| {
        let model = non_null(model, "model")?;
        let out = non_null_mut(out, "out")?;
        *out = dnls_core::soliton::mass_closed_form(&model.params, omega)?;
        Ok(())
    })
}

/// `(omega, m, d', d'')` at `omega`.
#[no_mangle]
pub extern "C" fn dnls_landscape(model: *const DnlsModel, omega: f64, out: *mut DnlsLandscape) -> DnlsStatus {
    guard(|| {
        let model = non_null(model, "model")?;
        let out = non_null_mut(out, "out")?;
        let r = d_derivatives(&model.params, omega, DerivativeMode::Closed)?;
        *out = DnlsLandscape { omega: r.omega, mass: r.mass, d1: r.d1, d2: r.d2 };
        Ok(())
    })
}

/// Evaluates `Q_omega` and, when `phi_out` is non-null, `phi_omega = dQ/domega` at the
/// `len` points of `x`.
#[no_mangle]
pub extern "C" fn dnls_profile(
    model: *const DnlsModel,
    omega: f64,
    x: *const f64,
    len: usize,
    q_out: *mut f64,
    phi_out: *mut f64,
) -> DnlsStatus {
    guard(|| {
        let model = non_null(model, "model")?;
        let x = slice(x, len, "x")?;
        let q = slice_mut(q_out, len, "q_out")?;
        let profile = Profile::new(&model.params, omega)?;
        for (qi, &xi) in q.iter_mut().zip(x) {
            *qi = profile.value(xi);
        }
        if !phi_out.is_null() {
            let phi = slice_mut(phi_out, len, "phi_out")?;
            for (pi, &xi) in phi.iter_mut().zip(x) {
                *pi = profile.domega(xi);
            }
        }
        Ok(())
    })
}

/// Inertia and kernel of the linearised operators plus the constrained coercivity
/// constant at `omega`, on the default grids.
#[no_mangle]
pub extern "C" fn dnls_spectrum(model: *const DnlsModel, omega: f64, out: *mut DnlsSpectrum) -> DnlsStatus {
    guard(|| {
        let model = non_null(model, "model")?;
        let out = non_null_mut(out, "out")?;
        let fine = Grid::for_frequency(model.params.gamma(), omega, Resolution::Fine)?;
        let standard = Grid::for_frequency(model.params.gamma(), omega, Resolution::Standard)?;
        let s = spectral_structure(&model.params, omega, &fine)?;
        let c = coercivity_constant(&model.params, omega, &ALL_CONSTRAINTS, &standard)?;
        *out = DnlsSpectrum {
            n_negative: s.n_negative,
            lambda_neg: s.lambda_neg,
            kernel_residual: s.kernel_residual,
            chi_phi_cosine: s.chi_phi_cosine,
            kappa: c.kappa,
        };
        Ok(())
    })
}

/// Creates a solver started from `Q + lambda0 phi + rho~ Q` at `omega` on the default
/// evolution grid, with time step `dt` (negative steps run backward).
#[no_mangle]
pub extern "C" fn dnls_solver_new(
    model: *const DnlsModel,
    omega: f64,
    lambda0: f64,
    dt: f64,
    out: *mut *mut DnlsSolver,
) -> DnlsStatus {
    guard(|| {
        let model = non_null(model, "model")?;
        let out = non_null_mut(out, "out")?;
        let params = model.params;
        let grid = evolution_grid(&params, omega)?;
        let profiles = ProfileSet::resolved(&params, omega, &grid)?;
        let state = profiles.perturbed(lambda0, DEFAULT_LAMBDA_MAX)?;
        let propagator = Propagator::new(&params, &grid, dt, Nonlinearity::On)?;
        *out = Box::into_raw(Box::new(DnlsSolver { params, omega, propagator, state, time: 0.0, dt }));
        Ok(())
    })
}

/// Releases a solver. Null is ignored.
#[no_mangle]
pub extern "C" fn dnls_solver_free(solver: *mut DnlsSolver) {
    if !solver.is_null() {
        // SAFETY: `solver` came from `dnls_solver_new` and is freed once.
        drop(unsafe { Box::from_raw(solver) });
    }
}

/// Advances the solver by `steps` Strang steps. Fails without changing the time if
/// the state stops being finite.
#[no_mangle]
pub extern "C" fn dnls_solver_step(solver: *mut DnlsSolver, steps: usize) -> DnlsStatus {
    guard(|| {
        let solver = non_null_mut(solver, "solver")?;
        let mut next = solver.state.clone();
        solver.propagator.strang_steps(&mut next, steps);
        if next.values().iter().any(|z| !z.is_finite()) {
            return Err(Error::NotConverged(format!("state became non-finite within {steps} steps")).into());
        }
        solver.state = next;
        solver.time += steps as f64 * solver.dt;
        Ok(())
    })
}

/// Number of grid nodes of the solver state.
#[no_mangle]
pub extern "C" fn dnls_solver_len(solver: *const DnlsSolver, len_out: *mut usize) -> DnlsStatus {
    guard(|| {
        let solver = non_null(solver, "solver")?;
        *non_null_mut(len_out, "len_out")? = solver.state.grid().n();
        Ok(())
    })
}

/// Current time.
#[no_mangle]
pub extern "C" fn dnls_solver_time(solver: *const DnlsSolver, time_out: *mut f64) -> DnlsStatus {
    guard(|| {
        let solver = non_null(solver, "solver")?;
        *non_null_mut(time_out, "time_out")? = solver.time;
        Ok(())
    })
}

/// Copies the nodes and the real and imaginary parts of the state into arrays of
/// exactly `dnls_solver_len` elements. `x_out` may be null.
#[no_mangle]
pub extern "C" fn dnls_solver_state(
    solver: *const DnlsSolver,
    x_out: *mut f64,
    re_out: *mut f64,
    im_out: *mut f64,
    len: usize,
) -> DnlsStatus {
    guard(|| {
        let solver = non_null(solver, "solver")?;
        let n = solver.state.grid().n();
        if len != n {
            return Err(Error::InvalidParameter(format!("buffer length {len} does not match the grid size {n}")).into());
        }
        let re = slice_mut(re_out, len, "re_out")?;
        let im = slice_mut(im_out, len, "im_out")?;
        for ((r, i), z) in re.iter_mut().zip(im.iter_mut()).zip(solver.state.values()) {
            *r = z.re;
            *i = z.im;
        }
        if !x_out.is_null() {
            let x = slice_mut(x_out, len, "x_out")?;
            for (k, xk) in x.iter_mut().enumerate() {
                *xk = solver.state.grid().x(k);
            }
        }
        Ok(())
    })
}

/// Mass, energy and action (at the solver's frequency) of the current state.
#[no_mangle]
pub extern "C" fn dnls_solver_functionals(
    solver: *const DnlsSolver,
    mass_out: *mut f64,
    energy_out: *mut f64,
    action_out: *mut f64,
) -> DnlsStatus {
    guard(|| {
        let solver = non_null(solver, "solver")?;
        let values = functionals::values(&solver.state, &solver.params, solver.omega);
        *non_null_mut(mass_out, "mass_out")? = values.mass;
        *non_null_mut(energy_out, "energy_out")? = values.energy;
        *non_null_mut(action_out, "action_out")? = values.action;
        Ok(())
    })
}
