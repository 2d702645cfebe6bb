//! Serialized outputs: CSV tables with 17 significant digits and the JSON run report.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::functionals::CubicExpansion;
use crate::soliton::{CriticalData, LandscapeReport, ThirdDerivativeRoutes};

use super::config::RunConfig;

/// Column names of the time-series CSV, in order.
pub const TIME_SERIES_HEADER: [&str; 10] =
    ["t", "M", "E", "theta", "lambda", "eps_H1", "I", "dI_dt", "predicted_slope", "orbital_distance"];

pub const LANDSCAPE_HEADER: [&str; 4] = ["omega", "m", "d1", "d2"];
pub const EXPANSION_HEADER: [&str; 3] = ["lambda", "difference", "predicted"];
pub const SWEEP_HEADER: [&str; 7] = ["p", "gamma", "Omega", "d3", "kappa", "n_negative", "error"];

/// Seventeen significant digits, enough to round-trip every `f64`.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::InvalidParameter(format!("bad number '{s}' in CSV: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRow {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub theta: f64,
    pub lambda: f64,
    pub eps_h1: f64,
    pub virial: f64,
    pub di_dt: f64,
    pub predicted_slope: f64,
    pub orbital_distance: f64,
}

impl TimeSeriesRow {
    fn fields(&self) -> [f64; 10] {
        [
            self.t,
            self.mass,
            self.energy,
            self.theta,
            self.lambda,
            self.eps_h1,
            self.virial,
            self.di_dt,
            self.predicted_slope,
            self.orbital_distance,
        ]
    }

    fn from_fields(v: &[f64]) -> Self {
        Self {
            t: v[0],
            mass: v[1],
            energy: v[2],
            theta: v[3],
            lambda: v[4],
            eps_h1: v[5],
            virial: v[6],
            di_dt: v[7],
            predicted_slope: v[8],
            orbital_distance: v[9],
        }
    }

    /// Bitwise equality of every column, with any two NaNs treated as equal (NaN marks
    /// an untracked column and its payload is not preserved by the text format).
    pub fn same_bits(&self, other: &Self) -> bool {
        self.fields().iter().zip(other.fields()).all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()))
    }
}

fn write_table(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

fn read_table(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let found: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(Error::InvalidParameter(format!("unexpected CSV header in {}: {found:?}", path.display())));
    }
    reader.records().map(|r| r.map_err(Error::from)).collect()
}

pub fn write_time_series(path: &Path, rows: &[TimeSeriesRow]) -> Result<()> {
    write_table(path, &TIME_SERIES_HEADER, rows.iter().map(|r| r.fields().iter().map(|&x| fmt17(x)).collect()))
}

pub fn read_time_series(path: &Path) -> Result<Vec<TimeSeriesRow>> {
    read_table(path, &TIME_SERIES_HEADER)?
        .iter()
        .map(|record| {
            let values = record.iter().map(parse_f64).collect::<Result<Vec<f64>>>()?;
            Ok(TimeSeriesRow::from_fields(&values))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeRow {
    pub omega: f64,
    pub m: f64,
    pub d1: f64,
    pub d2: f64,
}

pub fn write_landscape(path: &Path, rows: &[LandscapeRow]) -> Result<()> {
    write_table(
        path,
        &LANDSCAPE_HEADER,
        rows.iter().map(|r| vec![fmt17(r.omega), fmt17(r.m), fmt17(r.d1), fmt17(r.d2)]),
    )
}

pub fn read_landscape(path: &Path) -> Result<Vec<LandscapeRow>> {
    read_table(path, &LANDSCAPE_HEADER)?
        .iter()
        .map(|r| {
            Ok(LandscapeRow {
                omega: parse_f64(&r[0])?,
                m: parse_f64(&r[1])?,
                d1: parse_f64(&r[2])?,
                d2: parse_f64(&r[3])?,
            })
        })
        .collect()
}

pub fn write_expansion(path: &Path, fit: &CubicExpansion) -> Result<()> {
    write_table(
        path,
        &EXPANSION_HEADER,
        fit.rows.iter().map(|r| vec![fmt17(r.lambda), fmt17(r.difference), fmt17(r.predicted)]),
    )
}

pub fn read_expansion(path: &Path) -> Result<Vec<[f64; 3]>> {
    read_table(path, &EXPANSION_HEADER)?
        .iter()
        .map(|r| Ok([parse_f64(&r[0])?, parse_f64(&r[1])?, parse_f64(&r[2])?]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    pub gamma: f64,
    pub omega: Option<f64>,
    pub d3: Option<f64>,
    pub kappa: Option<f64>,
    pub n_negative: Option<usize>,
    pub error: Option<String>,
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or(String::new(), fmt17);
    write_table(
        path,
        &SWEEP_HEADER,
        rows.iter().map(|r| {
            vec![
                fmt17(r.p),
                fmt17(r.gamma),
                opt(r.omega),
                opt(r.d3),
                opt(r.kappa),
                r.n_negative.map_or(String::new(), |n| n.to_string()),
                r.error.clone().unwrap_or_default(),
            ]
        }),
    )
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    let opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            parse_f64(s).map(Some)
        }
    };
    read_table(path, &SWEEP_HEADER)?
        .iter()
        .map(|r| {
            Ok(SweepRow {
                p: parse_f64(&r[0])?,
                gamma: parse_f64(&r[1])?,
                omega: opt(&r[2])?,
                d3: opt(&r[3])?,
                kappa: opt(&r[4])?,
                n_negative: if r[5].is_empty() {
                    None
                } else {
                    Some(r[5].parse().map_err(|e| Error::InvalidParameter(format!("bad n_negative: {e}")))?)
                },
                error: if r[6].is_empty() { None } else { Some(r[6].to_string()) },
            })
        })
        .collect()
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the inputs that determine a run: command name and the canonical config text.
pub fn input_hash(command: &str, config: &RunConfig) -> String {
    sha256_hex(format!("{command}\n{}", config.to_text()).as_bytes())
}

/// A file written by a run, with its content hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRef {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub rows: usize,
}

impl FileRef {
    pub fn new(out_dir: &Path, name: &str, rows: usize) -> Result<Self> {
        let bytes = std::fs::read(out_dir.join(name))?;
        Ok(Self { path: name.to_string(), sha256: sha256_hex(&bytes), rows })
    }

    /// Whether the file still exists with the recorded hash.
    pub fn verify(&self, out_dir: &Path) -> bool {
        std::fs::read(out_dir.join(&self.path)).map(|b| sha256_hex(&b) == self.sha256).unwrap_or(false)
    }
}

/// A named pass/fail check surfaced in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, pass: value <= threshold }
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, pass: value >= threshold }
    }

    pub fn equals(name: &str, value: f64, expected: f64) -> Self {
        Self { name: name.into(), value, threshold: expected, pass: value == expected }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub omega: f64,
    pub n_negative: usize,
    pub lambda_neg: f64,
    pub kernel_residual: f64,
    pub kernel_residual_strong: f64,
    pub chi_phi_cosine: f64,
    pub minus_lowest: f64,
    pub minus_negative: usize,
    pub structure_grid_n: usize,
    pub kappa: f64,
    pub kappa_real: f64,
    pub kappa_imag: f64,
    pub constraint_residuals: [f64; 3],
    pub coercivity_grid_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstabilityVerdicts {
    pub omega_discrete: f64,
    pub lambda0: f64,
    /// `|M(u0) - M(Q)| / M(Q)`.
    pub mass_defect: f64,
    pub lambda_persists: bool,
    pub min_lambda_ratio: f64,
    pub virial_decreasing_fraction: f64,
    pub slope_sign_agreement: f64,
    pub slope_window_samples: usize,
    pub initial_distance: f64,
    pub max_orbital_distance: f64,
    pub distance_growth: f64,
    /// First time the distance reached `growth_factor` times its initial value.
    pub growth_threshold_time: Option<f64>,
    pub tube_radius: f64,
    pub tube_exit_time: Option<f64>,
    pub tube_exit_reason: Option<String>,
    pub tracked_samples: usize,
    pub max_mass_drift: f64,
    pub max_energy_drift: f64,
    pub max_eps_mass_ratio: f64,
    pub max_paradyn_ratio: f64,
    pub kappa: Option<f64>,
    pub max_eps_clamp_ratio: Option<f64>,
    pub instability_verdict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlVerdict {
    pub omega: f64,
    pub initial_distance: f64,
    pub max_distance: f64,
    pub growth: f64,
    pub max_mass_drift: f64,
    pub max_energy_drift: f64,
    pub stable_verdict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub input_hash: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub critical: Option<CriticalData>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub landscape: Option<LandscapeReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub third_derivative: Option<ThirdDerivativeRoutes>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cubic_expansion: Option<CubicExpansion>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub spectrum: Option<SpectrumSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub instability: Option<InstabilityVerdicts>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub control: Option<ControlVerdict>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub files: Vec<FileRef>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            input_hash: input_hash(command, config),
            critical: None,
            landscape: None,
            third_derivative: None,
            cubic_expansion: None,
            spectrum: None,
            instability: None,
            control: None,
            checks: Vec::new(),
            files: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Writes `<command>.json` into the output directory and returns its path.
    pub fn write_json(&self, out_dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(out_dir)?;
        let path = out_dir.join(format!("{}.json", self.command));
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
