//! The experiment drivers behind each CLI subcommand.
//!
//! Every driver validates its configuration, writes its CSV files into `out_dir`,
//! and returns a [`RunReport`]. The caller decides where the JSON report goes.

use std::io::Write as _;
use std::sync::Mutex;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolution::{self, Control, Observer};
use crate::functionals::{self, cubic_expansion, FunctionalValues};
use crate::modulation::{orbital_distance, Modulation, TrackReport};
use crate::numerics::grid::{ComplexField, RealField, Resolution};
use crate::profiles::ProfileSet;
use crate::soliton::{
    critical_frequency, d_derivatives, d_third_at_critical, d_third_closed, landscape_at_critical, DerivativeMode,
    ModelParams,
};
use crate::spectrum::{coercivity_constant_of, spectral_structure_of, OperatorMatrix, Which, ALL_CONSTRAINTS};

use super::config::{Command, RunConfig};
use super::report::{
    write_expansion, write_landscape, write_sweep, write_time_series, Check, ControlVerdict, FileRef,
    InstabilityVerdicts, LandscapeRow, RunReport, SpectrumSummary, SweepRow, TimeSeriesRow,
};

/// Environment variable holding the sweep worker-pool size.
pub const WORKERS_ENV: &str = "DNLS_WORKERS";

/// Runs `command` with `config`.
pub fn run(command: Command, config: &RunConfig) -> Result<RunReport> {
    match command {
        Command::CriticalFreq => critical_freq(config),
        Command::Landscape => landscape(config),
        Command::Spectrum => spectrum(config),
        Command::Evolve => evolve(config),
        Command::Instability => instability(config),
        Command::Sweep => sweep(config).map(|(report, _)| report),
    }
}

fn prepare(command: Command, config: &RunConfig) -> Result<(ModelParams, RunReport)> {
    config.validate(command)?;
    let params = config.params()?;
    std::fs::create_dir_all(&config.out_dir)?;
    Ok((params, RunReport::new(command.name(), config)))
}

/// Critical frequency, landscape scalars at `Omega` and the three `d'''` routes.
pub fn critical_freq(config: &RunConfig) -> Result<RunReport> {
    let (params, mut report) = prepare(Command::CriticalFreq, config)?;
    let (critical, at_omega, routes) = landscape_at_critical(&params)?;
    let below = d_derivatives(&params, 0.9 * critical.omega_star, DerivativeMode::Closed)?;
    report.checks.push(Check::at_most("|d2(Omega)| / d2(0.9 Omega)", at_omega.d2.abs() / below.d2, 1e-6));
    report.checks.push(Check::at_most("d3(Omega)", routes.closed, 0.0));
    report.checks.push(Check::at_most("d3 route spread", routes.spread, crate::soliton::D3_ROUTE_TOL));
    report.critical = Some(critical);
    report.landscape = Some(at_omega);
    report.third_derivative = Some(routes);
    Ok(report)
}

/// `(omega, m, d', d'')` over a frequency range plus the cubic expansion at `Omega`.
pub fn landscape(config: &RunConfig) -> Result<RunReport> {
    let (params, mut report) = prepare(Command::Landscape, config)?;
    params.require_supercritical()?;
    let (critical, at_omega, routes) = landscape_at_critical(&params)?;
    let omega_star = critical.omega_star;
    let edge = params.omega_min();
    let hi = config.omega_max.unwrap_or(2.0 * omega_star);
    let lo = config.omega_min.unwrap_or(edge + 0.01 * (hi - edge));
    let points = config.omega_points;
    let rows = (0..points)
        .map(|k| {
            let omega = lo + (hi - lo) * k as f64 / (points - 1) as f64;
            let r = d_derivatives(&params, omega, DerivativeMode::Closed)?;
            Ok(LandscapeRow { omega, m: r.mass, d1: r.d1, d2: r.d2 })
        })
        .collect::<Result<Vec<_>>>()?;
    let sign_changes = rows.windows(2).filter(|w| (w[0].d2 > 0.0) != (w[1].d2 > 0.0)).count();
    write_landscape(&config.out_dir.join("landscape.csv"), &rows)?;
    report.files.push(FileRef::new(&config.out_dir, "landscape.csv", rows.len())?);

    let grid = config.grid(omega_star, Resolution::Standard)?;
    let profiles = ProfileSet::resolved_critical(&params, &grid)?;
    let fit = cubic_expansion(&profiles, routes.closed, &config.lambda_ladder, config.lambda_max)?;
    write_expansion(&config.out_dir.join("expansion.csv"), &fit)?;
    report.files.push(FileRef::new(&config.out_dir, "expansion.csv", fit.rows.len())?);

    report.checks.push(Check::equals("d2 sign changes on the range", sign_changes as f64, 1.0));
    report.checks.push(Check::at_most("|exponent - 3|", (fit.exponent - 3.0).abs(), 0.1));
    report.checks.push(Check::at_most("coefficient relative error", fit.coefficient_rel_error, 0.2));
    report.critical = Some(critical);
    report.landscape = Some(at_omega);
    report.third_derivative = Some(routes);
    report.cubic_expansion = Some(fit);
    Ok(report)
}

fn target_omega(config: &RunConfig, params: &ModelParams) -> Result<f64> {
    match config.omega {
        Some(w) => {
            params.check_omega(w)?;
            Ok(w)
        }
        None => Ok(critical_frequency(params)?.omega_star),
    }
}

/// Spectral structure (fine grid) and constrained coercivity (standard grid) at `omega`.
pub fn spectrum_summary(config: &RunConfig, params: &ModelParams, omega: f64) -> Result<SpectrumSummary> {
    let fine = config.grid(omega, Resolution::Fine)?;
    let structure = spectral_structure_of(&ProfileSet::closed_form(params, omega, &fine)?)?;
    let standard = config.grid(omega, Resolution::Standard)?;
    let coercivity = coercivity_constant_of(&ProfileSet::closed_form(params, omega, &standard)?, &ALL_CONSTRAINTS)?;
    Ok(SpectrumSummary {
        omega,
        n_negative: structure.n_negative,
        lambda_neg: structure.lambda_neg,
        kernel_residual: structure.kernel_residual,
        kernel_residual_strong: structure.kernel_residual_strong,
        chi_phi_cosine: structure.chi_phi_cosine,
        minus_lowest: structure.minus_lowest,
        minus_negative: structure.minus_negative,
        structure_grid_n: fine.n(),
        kappa: coercivity.kappa,
        kappa_real: coercivity.kappa_real,
        kappa_imag: coercivity.kappa_imag,
        constraint_residuals: coercivity.constraint_residuals,
        coercivity_grid_n: standard.n(),
    })
}

pub fn spectrum(config: &RunConfig) -> Result<RunReport> {
    let (params, mut report) = prepare(Command::Spectrum, config)?;
    let omega = target_omega(config, &params)?;
    let summary = spectrum_summary(config, &params, omega)?;
    report.checks.push(Check::equals("n_negative", summary.n_negative as f64, 1.0));
    report.checks.push(Check::at_most("kernel residual", summary.kernel_residual, 1e-5));
    report.checks.push(Check::at_least("|<chi, phi>| / (‖chi‖ ‖phi‖)", summary.chi_phi_cosine, 1e-3));
    report.checks.push(Check {
        name: "kappa > 0".into(),
        value: summary.kappa,
        threshold: 0.0,
        pass: summary.kappa > 0.0,
    });
    report.spectrum = Some(summary);
    Ok(report)
}

/// Records the orbital distance to a fixed profile at every sample.
struct DistanceObserver<'a> {
    q: &'a RealField,
    samples: Vec<(f64, f64, FunctionalValues)>,
}

impl Observer for DistanceObserver<'_> {
    fn observe(&mut self, t: f64, u: &ComplexField, values: &FunctionalValues) -> Control {
        self.samples.push((t, orbital_distance(u, self.q).unwrap_or(f64::NAN), *values));
        Control::Continue
    }
}

fn rows_from_track(track: &TrackReport) -> Vec<TimeSeriesRow> {
    track
        .samples
        .iter()
        .zip(&track.records)
        .map(|(s, r)| TimeSeriesRow {
            t: s.t,
            mass: s.mass,
            energy: s.energy,
            theta: s.theta,
            lambda: s.lambda,
            eps_h1: s.eps_h1,
            virial: s.virial,
            di_dt: r.di_dt_fd,
            predicted_slope: r.predicted_slope,
            orbital_distance: s.orbital_distance,
        })
        .collect()
}

fn rows_from_distances(samples: &[(f64, f64, FunctionalValues)]) -> Vec<TimeSeriesRow> {
    samples
        .iter()
        .map(|&(t, d, v)| TimeSeriesRow {
            t,
            mass: v.mass,
            energy: v.energy,
            theta: f64::NAN,
            lambda: f64::NAN,
            eps_h1: f64::NAN,
            virial: f64::NAN,
            di_dt: f64::NAN,
            predicted_slope: f64::NAN,
            orbital_distance: d,
        })
        .collect()
}

/// Evolves `Q + lambda0 phi + rho~ Q` (plus optional seeded noise) at `omega`.
pub fn evolve(config: &RunConfig) -> Result<RunReport> {
    let (params, mut report) = prepare(Command::Evolve, config)?;
    let omega = target_omega(config, &params)?;
    let grid = config.grid(omega, Resolution::Evolution)?;
    let profiles = ProfileSet::resolved(&params, omega, &grid)?;
    let mut u0 = profiles.perturbed(config.lambda0, config.lambda_max)?;
    if config.noise_amplitude > 0.0 {
        let mut rng = rand::rngs::StdRng::seed_from_u64(config.seed);
        let n = grid.n();
        for z in &mut u0.values_mut()[1..n - 1] {
            *z += config.noise_amplitude * Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
    }
    let d3 = match params.require_supercritical().and_then(|_| critical_frequency(&params)) {
        Ok(c) if (c.omega_star - omega).abs() <= 1e-12 * omega => d_third_closed(&params, &c),
        _ => f64::NAN,
    };
    let modulation = Modulation::new(profiles.clone(), d3).with_tube_radius(config.tube_factor * profiles.q_h1_norm());
    let mut tracker = modulation.tracker().continue_after_exit();
    let mut distances = DistanceObserver { q: profiles.q(), samples: Vec::new() };
    let series = evolution::evolve(&u0, &params, &config.solver(omega), &mut [&mut tracker, &mut distances])?;
    let track = tracker.finish()?;
    let mut rows = rows_from_distances(&distances.samples);
    for (row, tracked) in rows.iter_mut().zip(rows_from_track(&track)) {
        *row = tracked;
    }
    write_time_series(&config.out_dir.join("evolve.csv"), &rows)?;
    report.files.push(FileRef::new(&config.out_dir, "evolve.csv", rows.len())?);
    report.checks.push(Check::at_most(
        "max relative mass drift",
        series.max_mass_drift(),
        config.conservation_abort_threshold,
    ));
    report.checks.push(Check::at_most(
        "max relative energy drift",
        series.max_energy_drift(),
        config.conservation_abort_threshold,
    ));
    report.notes.push(format!(
        "outcome: {:?}; grid n = {}; final time {}",
        series.outcome,
        grid.n(),
        series.final_time()
    ));
    if let Some(t) = track.tube_exit_time {
        report
            .notes
            .push(format!("tracking stopped at t = {t}: {}", track.tube_exit_reason.clone().unwrap_or_default()));
    }
    Ok(report)
}

/// Result of the tracked run from `Q + lambda0 phi + rho~ Q` at the discrete critical frequency.
#[derive(Debug, Clone)]
pub struct InstabilityRun {
    pub verdicts: InstabilityVerdicts,
    pub track: TrackReport,
    pub rows: Vec<TimeSeriesRow>,
}

/// Evolves the perturbed critical profile until tube exit or `t_end`, tracking the modulation.
pub fn instability_run(config: &RunConfig, params: &ModelParams, lambda0: f64) -> Result<InstabilityRun> {
    let critical = critical_frequency(params)?;
    let d3 = d_third_closed(params, &critical);
    let grid = config.grid(critical.omega_star, Resolution::Evolution)?;
    let profiles = ProfileSet::resolved_critical(params, &grid)?;
    let u0 = profiles.perturbed(lambda0, config.lambda_max)?;
    let mass_defect =
        (functionals::mass(&u0) - functionals::mass(profiles.q())).abs() / functionals::mass(profiles.q());
    let tube_radius = config.tube_factor * profiles.q_h1_norm();
    let modulation = Modulation::new(profiles.clone(), d3).with_tube_radius(tube_radius);
    let mut tracker = modulation.tracker();
    let series = evolution::evolve(&u0, params, &config.solver(profiles.omega()), &mut [&mut tracker])?;
    let track = tracker.finish()?;
    let kappa = coercivity_constant_of(&profiles, &ALL_CONSTRAINTS).ok().map(|c| c.kappa);

    let initial_distance = track.samples.first().map_or(f64::NAN, |s| s.orbital_distance);
    let max_orbital_distance = track.samples.iter().map(|s| s.orbital_distance).fold(0.0, f64::max);
    let growth_threshold_time =
        track.samples.iter().find(|s| s.orbital_distance >= config.growth_factor * initial_distance).map(|s| s.t);
    let (agreement, window) = track.slope_sign_agreement();
    let min_lambda_ratio = track.samples.iter().map(|s| s.lambda / lambda0).fold(f64::INFINITY, f64::min);
    let max_eps_clamp_ratio = kappa.map(|k| {
        track
            .samples
            .iter()
            .filter(|s| s.lambda > 0.0)
            .map(|s| s.eps_h1 * s.eps_h1 / (-(2.0 / k) * d3 * s.lambda.powi(3)))
            .fold(0.0, f64::max)
    });
    let lambda_persists = track.lambda_persists(lambda0);
    let decreasing = track.virial_decreasing_fraction();
    let growth = track.distance_growth();
    let instability_verdict = lambda0 > 0.0
        && lambda_persists
        && decreasing == 1.0
        && agreement >= 0.9
        && growth >= config.growth_factor
        && mass_defect <= 1e-12;
    let verdicts = InstabilityVerdicts {
        omega_discrete: profiles.omega(),
        lambda0,
        mass_defect,
        lambda_persists,
        min_lambda_ratio,
        virial_decreasing_fraction: decreasing,
        slope_sign_agreement: agreement,
        slope_window_samples: window,
        initial_distance,
        max_orbital_distance,
        distance_growth: growth,
        growth_threshold_time,
        tube_radius,
        tube_exit_time: track.tube_exit_time,
        tube_exit_reason: track.tube_exit_reason.clone(),
        tracked_samples: track.samples.len(),
        max_mass_drift: series.max_mass_drift(),
        max_energy_drift: series.max_energy_drift(),
        max_eps_mass_ratio: track.max_eps_mass_ratio(),
        max_paradyn_ratio: track.max_paradyn_ratio(),
        kappa,
        max_eps_clamp_ratio,
        instability_verdict,
    };
    let rows = rows_from_track(&track);
    Ok(InstabilityRun { verdicts, track, rows })
}

/// Companion run on the stable branch at `omega_ctl = (gamma²/4 + Omega)/2`.
pub fn control_run(
    config: &RunConfig,
    params: &ModelParams,
    lambda0: f64,
) -> Result<(ControlVerdict, Vec<TimeSeriesRow>)> {
    let critical = critical_frequency(params)?;
    let omega = 0.5 * (params.omega_min() + critical.omega_star);
    let grid = config.grid(omega, Resolution::Evolution)?;
    let profiles = ProfileSet::resolved(params, omega, &grid)?;
    let u0 = profiles.perturbed(lambda0, config.lambda_max)?;
    let mut distances = DistanceObserver { q: profiles.q(), samples: Vec::new() };
    let series = evolution::evolve(&u0, params, &config.solver(omega), &mut [&mut distances])?;
    let initial_distance = distances.samples[0].1;
    let max_distance = distances.samples.iter().map(|s| s.1).fold(0.0, f64::max);
    let growth = max_distance / initial_distance;
    let verdict = ControlVerdict {
        omega,
        initial_distance,
        max_distance,
        growth,
        max_mass_drift: series.max_mass_drift(),
        max_energy_drift: series.max_energy_drift(),
        stable_verdict: growth <= config.control_factor,
    };
    Ok((verdict, rows_from_distances(&distances.samples)))
}

pub fn instability(config: &RunConfig) -> Result<RunReport> {
    let (params, mut report) = prepare(Command::Instability, config)?;
    params.require_supercritical()?;
    let lambda0 = config.lambda0;
    let (main, control) =
        rayon::join(|| instability_run(config, &params, lambda0), || control_run(config, &params, lambda0));
    let main = main?;
    let (control, control_rows) = control?;

    write_time_series(&config.out_dir.join("instability.csv"), &main.rows)?;
    report.files.push(FileRef::new(&config.out_dir, "instability.csv", main.rows.len())?);
    write_time_series(&config.out_dir.join("control.csv"), &control_rows)?;
    report.files.push(FileRef::new(&config.out_dir, "control.csv", control_rows.len())?);

    if config.exploratory_negative {
        match instability_run(config, &params, -lambda0) {
            Ok(run) => {
                write_time_series(&config.out_dir.join("instability-negative.csv"), &run.rows)?;
                report.files.push(FileRef::new(&config.out_dir, "instability-negative.csv", run.rows.len())?);
                report.notes.push("negative-lambda0 run written as exploratory output without a verdict".into());
            }
            Err(err) => report.notes.push(format!("negative-lambda0 exploratory run failed: {err}")),
        }
    }

    let v = &main.verdicts;
    report.checks.push(Check::at_most("mass defect of the initial data", v.mass_defect, 1e-12));
    report.checks.push(Check::at_least("min lambda(t) / lambda0", v.min_lambda_ratio, 0.5));
    report.checks.push(Check::at_least("fraction of strictly decreasing I steps", v.virial_decreasing_fraction, 1.0));
    report.checks.push(Check::at_least("dI/dt sign agreement in the window", v.slope_sign_agreement, 0.9));
    report.checks.push(Check::at_least("orbital distance growth", v.distance_growth, config.growth_factor));
    report.checks.push(Check::at_most("control distance growth", control.growth, config.control_factor));
    report.instability = Some(main.verdicts);
    report.control = Some(control);
    Ok(report)
}

/// Number of sweep workers from [`WORKERS_ENV`], defaulting to the available parallelism.
pub fn worker_count() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::InvalidConfig(vec![format!("{WORKERS_ENV} must be a positive integer, got '{v}'")])),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// One sweep row: critical frequency, `d'''`, inertia of `L_+` and the coercivity constant.
pub fn sweep_row(config: &RunConfig, p: f64, gamma: f64) -> SweepRow {
    let mut row = SweepRow { p, gamma, omega: None, d3: None, kappa: None, n_negative: None, error: None };
    let result = (|| -> Result<()> {
        let params = ModelParams::new(p, gamma)?;
        let critical = critical_frequency(&params)?;
        row.omega = Some(critical.omega_star);
        row.d3 = Some(d_third_at_critical(&params)?);
        let grid = config.grid(critical.omega_star, Resolution::Standard)?;
        let profiles = ProfileSet::closed_form(&params, critical.omega_star, &grid)?;
        let plus = OperatorMatrix::around(&params, critical.omega_star, Which::Plus, profiles.q())?;
        row.n_negative = Some(plus.negative_count());
        row.kappa = Some(coercivity_constant_of(&profiles, &ALL_CONSTRAINTS)?.kappa);
        Ok(())
    })();
    if let Err(err) = result {
        row.error = Some(err.to_string());
    }
    row
}

/// Runs every `(p, gamma)` pair of the configured lists on a bounded worker pool.
///
/// Rows come back in list order. Fails only when every row failed.
pub fn sweep(config: &RunConfig) -> Result<(RunReport, Vec<SweepRow>)> {
    config.validate(Command::Sweep)?;
    std::fs::create_dir_all(&config.out_dir)?;
    let mut report = RunReport::new(Command::Sweep.name(), config);
    let jobs: Vec<(f64, f64)> =
        config.p_list.iter().flat_map(|&p| config.gamma_list.iter().map(move |&g| (p, g))).collect();
    let workers = worker_count()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build worker pool: {e}")))?;
    let log = Mutex::new(std::fs::OpenOptions::new().create(true).append(true).open(config.out_dir.join("sweep.log"))?);
    let rows: Vec<SweepRow> = pool.install(|| {
        jobs.par_iter()
            .map(|&(p, g)| {
                let row = sweep_row(config, p, g);
                if let Ok(mut file) = log.lock() {
                    let status = row.error.as_deref().unwrap_or("ok");
                    let _ = writeln!(file, "p={p} gamma={g} {status}");
                }
                row
            })
            .collect()
    });
    write_sweep(&config.out_dir.join("sweep.csv"), &rows)?;
    report.files.push(FileRef::new(&config.out_dir, "sweep.csv", rows.len())?);
    report.notes.push(format!("{workers} workers"));
    for row in &rows {
        let label = format!("p={} gamma={}", row.p, row.gamma);
        if let Some(err) = &row.error {
            report.notes.push(format!("{label}: {err}"));
        }
        if let (Some(d3), Some(n), Some(k)) = (row.d3, row.n_negative, row.kappa) {
            report.checks.push(Check::at_most(&format!("{label} d3"), d3, 0.0));
            report.checks.push(Check::equals(&format!("{label} n_negative"), n as f64, 1.0));
            report.checks.push(Check { name: format!("{label} kappa > 0"), value: k, threshold: 0.0, pass: k > 0.0 });
        }
    }
    if rows.iter().all(|r| r.error.is_some()) {
        let first = rows.first().and_then(|r| r.error.clone()).unwrap_or_default();
        return Err(Error::NotConverged(format!("every sweep row failed (first: {first})")));
    }
    Ok((report, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config_in(dir: &std::path::Path) -> RunConfig {
        RunConfig { out_dir: dir.to_path_buf(), ..RunConfig::default() }
    }

    #[test]
    fn critical_freq_report_passes_its_checks() {
        let dir = tempfile::tempdir().unwrap();
        let report = critical_freq(&config_in(dir.path())).unwrap();
        assert!(report.all_checks_pass(), "{:?}", report.checks);
        assert!(report.landscape.unwrap().d3.unwrap() < 0.0);
    }

    #[test]
    fn stable_range_is_an_invalid_input() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig { p: 4.0, ..config_in(dir.path()) };
        let err = critical_freq(&config).unwrap_err();
        assert!(err.is_invalid_input());
        assert!(err.to_string().contains("stable range"));
    }

    #[test]
    fn landscape_writes_round_trippable_files() {
        let dir = tempfile::tempdir().unwrap();
        let report = landscape(&config_in(dir.path())).unwrap();
        assert!(report.all_checks_pass(), "{:?}", report.checks);
        for file in &report.files {
            assert!(file.verify(dir.path()));
        }
        let rows = super::super::report::read_landscape(&dir.path().join("landscape.csv")).unwrap();
        assert_eq!(rows.len(), 41);
    }

    #[test]
    fn sweep_rows_are_ordered_and_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig { p_list: vec![7.0, 4.0, 7.0], gamma_list: vec![1.0], ..config_in(dir.path()) };
        let (_, rows) = sweep(&config).unwrap();
        assert_eq!(rows.iter().map(|r| r.p).collect::<Vec<_>>(), vec![7.0, 4.0, 7.0]);
        assert!(rows[1].error.is_some());
        assert_eq!(rows[0], rows[2]);
        let all_bad = RunConfig { p_list: vec![3.0], gamma_list: vec![1.0], ..config_in(dir.path()) };
        assert!(sweep(&all_bad).is_err());
    }
}
