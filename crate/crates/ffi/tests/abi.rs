use std::ffi::c_char;
use std::ptr;

use dnls_ffi::*;

fn model(p: f64, gamma: f64) -> *mut DnlsModel {
    let mut m = ptr::null_mut();
    assert_eq!(dnls_model_new(p, gamma, &mut m), DnlsStatus::Ok);
    assert!(!m.is_null());
    m
}

fn last_error() -> String {
    let n = dnls_last_error_message(ptr::null_mut(), 0);
    let mut buf = vec![0 as c_char; n + 1];
    dnls_last_error_message(buf.as_mut_ptr(), buf.len());
    let bytes: Vec<u8> = buf[..n].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn critical_frequency_scales_with_gamma_squared() {
    let (a, b) = (model(7.0, 1.0), model(7.0, 2.0));
    let (mut wa, mut wb) = (0.0, 0.0);
    assert_eq!(dnls_critical_frequency(a, &mut wa), DnlsStatus::Ok);
    assert_eq!(dnls_critical_frequency(b, &mut wb), DnlsStatus::Ok);
    assert!((wb / wa - 4.0).abs() < 1e-10);
    let mut d3 = 0.0;
    assert_eq!(dnls_d_third(a, &mut d3), DnlsStatus::Ok);
    assert!(d3 < 0.0);
    let mut land = DnlsLandscape::default();
    assert_eq!(dnls_landscape(a, wa, &mut land), DnlsStatus::Ok);
    assert!(land.d2.abs() < 1e-8);
    let mut m = 0.0;
    assert_eq!(dnls_mass(a, wa, &mut m), DnlsStatus::Ok);
    assert_eq!(m, land.mass);
    dnls_model_free(a);
    dnls_model_free(b);
}

#[test]
fn errors_map_to_status_codes_with_messages() {
    let mut m = ptr::null_mut();
    assert_eq!(dnls_model_new(f64::NAN, 1.0, &mut m), DnlsStatus::InvalidArgument);
    assert!(m.is_null());
    assert!(!last_error().is_empty());

    let stable = model(4.0, 1.0);
    let mut w = 0.0;
    assert_eq!(dnls_critical_frequency(stable, &mut w), DnlsStatus::DomainError);
    assert!(last_error().contains("stable range"));
    let mut land = DnlsLandscape::default();
    assert_eq!(dnls_landscape(stable, 0.1, &mut land), DnlsStatus::DomainError);
    assert_eq!(dnls_critical_frequency(stable, ptr::null_mut()), DnlsStatus::NullPointer);
    assert!(last_error().contains("omega_out"));
    assert_eq!(dnls_critical_frequency(ptr::null(), &mut w), DnlsStatus::NullPointer);
    dnls_model_free(stable);
    dnls_model_free(ptr::null_mut());
}

#[test]
fn truncated_error_buffer_is_terminated() {
    let mut w = 0.0;
    assert_eq!(dnls_critical_frequency(ptr::null(), &mut w), DnlsStatus::NullPointer);
    let mut buf = [1 as c_char; 5];
    let full = dnls_last_error_message(buf.as_mut_ptr(), buf.len());
    assert!(full > 4);
    assert_eq!(buf[4], 0);
}

#[test]
fn profile_arrays_match_the_landscape_mass() {
    let m = model(7.0, 1.0);
    let omega = 0.8;
    let n = 40001;
    let l = 40.0;
    let h = 2.0 * l / (n - 1) as f64;
    let x: Vec<f64> = (0..n).map(|i| -l + i as f64 * h).collect();
    let mut q = vec![0.0; n];
    let mut phi = vec![0.0; n];
    assert_eq!(dnls_profile(m, omega, x.as_ptr(), n, q.as_mut_ptr(), phi.as_mut_ptr()), DnlsStatus::Ok);
    let trapezoid: f64 = 0.5 * q.iter().map(|v| v * v).sum::<f64>() * h;
    let mut mass = 0.0;
    assert_eq!(dnls_mass(m, omega, &mut mass), DnlsStatus::Ok);
    assert!((trapezoid - mass).abs() < 1e-6 * mass, "{trapezoid} vs {mass}");
    assert!(phi.iter().all(|v| v.is_finite()));
    assert_eq!(dnls_profile(m, omega, x.as_ptr(), n, q.as_mut_ptr(), ptr::null_mut()), DnlsStatus::Ok);
    assert_eq!(dnls_profile(m, omega, ptr::null(), n, q.as_mut_ptr(), ptr::null_mut()), DnlsStatus::NullPointer);
    dnls_model_free(m);
}

#[test]
fn spectrum_summary_at_the_critical_frequency() {
    let m = model(7.0, 1.0);
    let mut w = 0.0;
    assert_eq!(dnls_critical_frequency(m, &mut w), DnlsStatus::Ok);
    let mut s = DnlsSpectrum::default();
    assert_eq!(dnls_spectrum(m, w, &mut s), DnlsStatus::Ok);
    assert_eq!(s.n_negative, 1);
    assert!(s.kernel_residual < 1e-5);
    assert!(s.kappa > 0.0);
    dnls_model_free(m);
}

#[test]
fn solver_conserves_mass_and_runs_backward() {
    let m = model(7.0, 1.0);
    let mut solver = ptr::null_mut();
    assert_eq!(dnls_solver_new(m, 0.7, 0.01, 1e-3, &mut solver), DnlsStatus::Ok);
    let mut n = 0;
    assert_eq!(dnls_solver_len(solver, &mut n), DnlsStatus::Ok);
    let (mut m0, mut e0, mut s0) = (0.0, 0.0, 0.0);
    assert_eq!(dnls_solver_functionals(solver, &mut m0, &mut e0, &mut s0), DnlsStatus::Ok);
    let mut re0 = vec![0.0; n];
    let mut im0 = vec![0.0; n];
    assert_eq!(dnls_solver_state(solver, ptr::null_mut(), re0.as_mut_ptr(), im0.as_mut_ptr(), n), DnlsStatus::Ok);

    assert_eq!(dnls_solver_step(solver, 500), DnlsStatus::Ok);
    let mut t = 0.0;
    assert_eq!(dnls_solver_time(solver, &mut t), DnlsStatus::Ok);
    assert!((t - 0.5).abs() < 1e-12);
    let (mut m1, mut e1, mut s1) = (0.0, 0.0, 0.0);
    assert_eq!(dnls_solver_functionals(solver, &mut m1, &mut e1, &mut s1), DnlsStatus::Ok);
    assert!((m1 - m0).abs() < 1e-10 * m0);
    assert!((e1 - e0).abs() < 1e-6 * e0.abs());

    let mut back = ptr::null_mut();
    assert_eq!(dnls_solver_new(m, 0.7, 0.01, -1e-3, &mut back), DnlsStatus::Ok);
    let mut x = vec![0.0; n];
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    assert_eq!(dnls_solver_state(solver, x.as_mut_ptr(), re.as_mut_ptr(), im.as_mut_ptr(), n), DnlsStatus::Ok);
    assert!(x[0] < 0.0 && x[n - 1] > 0.0);
    assert_eq!(
        dnls_solver_state(solver, ptr::null_mut(), re.as_mut_ptr(), im.as_mut_ptr(), n - 1),
        DnlsStatus::InvalidArgument
    );
    dnls_solver_free(back);
    dnls_solver_free(solver);
    dnls_solver_free(ptr::null_mut());
    dnls_model_free(m);
}

#[test]
fn solver_rejects_bad_arguments() {
    let m = model(7.0, 1.0);
    let mut solver = ptr::null_mut();
    assert_eq!(dnls_solver_new(m, 0.7, 0.01, 0.0, &mut solver), DnlsStatus::InvalidArgument);
    assert_eq!(dnls_solver_new(m, 0.1, 0.01, 1e-3, &mut solver), DnlsStatus::DomainError);
    assert!(solver.is_null());
    assert_eq!(dnls_solver_step(ptr::null_mut(), 1), DnlsStatus::NullPointer);
    dnls_model_free(m);
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/dnls.h")).unwrap();
    for name in [
        "dnls_last_error_message",
        "dnls_model_new",
        "dnls_model_free",
        "dnls_critical_frequency",
        "dnls_d_third",
        "dnls_mass",
        "dnls_landscape",
        "dnls_profile",
        "dnls_spectrum",
        "dnls_solver_new",
        "dnls_solver_free",
        "dnls_solver_step",
        "dnls_solver_len",
        "dnls_solver_time",
        "dnls_solver_state",
        "dnls_solver_functionals",
        "DNLS_STATUS_DOMAIN_ERROR",
    ] {
        assert!(header.contains(name), "{name} missing from the header");
    }
}
