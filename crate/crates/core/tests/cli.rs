use std::path::Path;
use std::process::{Command, Output};

use dnls_core::experiment::report::{read_expansion, read_landscape, read_sweep, read_time_series};
use dnls_core::experiment::RunReport;

fn dnls(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnls"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env("DNLS_WORKERS", "2")
        .output()
        .expect("the dnls binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn critical_freq_reports_degeneracy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dnls(&["critical-freq", "--p", "7", "--gamma", "1"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let report = RunReport::read_json(&dir.path().join("critical-freq.json")).unwrap();
    assert!(report.all_checks_pass());
    let landscape = report.landscape.unwrap();
    assert!(landscape.d2.abs() < 1e-10 && landscape.d3.unwrap() < 0.0);
    assert_eq!(report.config.p, 7.0);
    assert_eq!(report.input_hash.len(), 64);

    let dir2 = tempfile::tempdir().unwrap();
    let out = dnls(&["critical-freq", "--p", "7", "--gamma", "2"], dir2.path());
    assert!(out.status.success());
    let doubled = RunReport::read_json(&dir2.path().join("critical-freq.json")).unwrap();
    let ratio = doubled.critical.unwrap().omega_star / report.critical.unwrap().omega_star;
    assert!((ratio - 4.0).abs() < 1e-10);
    assert_ne!(doubled.input_hash, report.input_hash);
}

#[test]
fn stable_range_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dnls(&["critical-freq", "--p", "4", "--gamma", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("stable range"), "{}", stderr(&out));
}

#[test]
fn invalid_config_file_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.cfg");
    std::fs::write(&config, "p = 7\ngamma = -1\nlambda0 = 0.5\nbogus = 3\n").unwrap();
    let out = dnls(&["instability", "--config", config.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("bogus"), "{err}");

    std::fs::write(&config, "p = 7\ngamma = -1\nlambda0 = 0.5\n").unwrap();
    let out = dnls(&["instability", "--config", config.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("gamma") && err.contains("lambda0"), "{err}");
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.cfg");
    std::fs::write(&config, "# p from the file\np = 4\n").unwrap();
    let out = dnls(&["critical-freq", "--config", config.to_str().unwrap(), "--p", "9"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let report = RunReport::read_json(&dir.path().join("critical-freq.json")).unwrap();
    assert_eq!(report.config.p, 9.0);
}

#[test]
fn landscape_csvs_round_trip_and_match_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dnls(&["landscape"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let report = RunReport::read_json(&dir.path().join("landscape.json")).unwrap();
    assert!(report.all_checks_pass(), "{:?}", report.checks);
    for file in &report.files {
        assert!(file.verify(dir.path()), "{}", file.path);
    }
    let rows = read_landscape(&dir.path().join("landscape.csv")).unwrap();
    assert_eq!(rows.len(), 41);
    assert!(rows.windows(2).all(|w| w[1].omega > w[0].omega));
    let header = std::fs::read_to_string(dir.path().join("landscape.csv")).unwrap();
    assert!(header.starts_with("omega,m,d1,d2\n"));
    let expansion = read_expansion(&dir.path().join("expansion.csv")).unwrap();
    assert_eq!(expansion.len(), 4);
}

#[test]
fn spectrum_at_a_stable_frequency() {
    let dir = tempfile::tempdir().unwrap();
    let out = dnls(&["spectrum", "--omega", "0.7", "--strict"], dir.path());
    assert!(out.status.success(), "{}{}", stdout(&out), stderr(&out));
    let report = RunReport::read_json(&dir.path().join("spectrum.json")).unwrap();
    let s = report.spectrum.unwrap();
    assert_eq!(s.n_negative, 1);
    assert!(s.kappa > 0.0);
}

#[test]
fn short_evolve_writes_a_time_series() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["evolve", "--omega", "0.7", "--lambda0", "0.01", "--t-end", "0.2", "--dt", "1e-3", "--n", "4001"];
    let out = dnls(&args, dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = read_time_series(&dir.path().join("evolve.csv")).unwrap();
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().all(|r| r.lambda.is_nan() || (r.lambda - 0.01).abs() < 1e-3));
    let header = std::fs::read_to_string(dir.path().join("evolve.csv")).unwrap();
    assert!(header.starts_with("t,M,E,theta,lambda,eps_H1,I,dI_dt,predicted_slope,orbital_distance\n"));

    let seeded = |seed: &str, sub: &str| {
        let d = dir.path().join(sub);
        let mut a = args.to_vec();
        a.extend(["--seed", seed]);
        std::fs::create_dir_all(&d).unwrap();
        std::fs::write(d.join("noise.cfg"), "noise_amplitude = 1e-4\n").unwrap();
        let cfg = d.join("noise.cfg");
        a.extend(["--config", cfg.to_str().unwrap()]);
        assert!(dnls(&a, &d).status.success());
        std::fs::read(d.join("evolve.csv")).unwrap()
    };
    assert_eq!(seeded("3", "a"), seeded("3", "b"));
    assert_ne!(seeded("3", "c"), seeded("4", "d"));
}

#[test]
fn sweep_keeps_row_order_and_reports_row_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dnls(&["sweep", "--p-list", "7,4,7", "--gamma-list", "1"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = read_sweep(&dir.path().join("sweep.csv")).unwrap();
    assert_eq!(rows.iter().map(|r| r.p).collect::<Vec<_>>(), vec![7.0, 4.0, 7.0]);
    assert!(rows[1].error.as_deref().unwrap().contains("stable range"));
    assert_eq!(rows[0], rows[2]);
    let log = std::fs::read_to_string(dir.path().join("sweep.log")).unwrap();
    assert_eq!(log.lines().count(), 3);

    let out = dnls(&["sweep", "--p-list", "3,4", "--gamma-list", "1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_worker_count_is_an_invalid_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dnls"))
        .args(["sweep", "--p-list", "7", "--gamma-list", "1", "--out-dir"])
        .arg(dir.path())
        .env("DNLS_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("DNLS_WORKERS"));
}
