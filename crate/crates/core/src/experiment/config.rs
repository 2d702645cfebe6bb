//! Run configuration: defaults, a flat `key = value` file format and flag overrides.
//!
//! File format, one setting per line:
//!
//! ```text
//! # comment
//! p = 7
//! gamma = 1
//! lambda0 = 0.02
//! p_list = 6, 7, 9
//! ```
//!
//! Keys are the field names of [`RunConfig`]. Unknown keys and unparsable values are
//! reported together with every other violation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{Scheme, SolverConfig, DEFAULT_ABORT_THRESHOLD, DEFAULT_DT, DEFAULT_OBSERVER_STRIDE};
use crate::functionals::Nonlinearity;
use crate::numerics::grid::{Grid, Resolution};
use crate::soliton::{ModelParams, DEFAULT_LAMBDA_MAX};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub p: f64,
    pub gamma: f64,
    /// Frequency for `spectrum` and `evolve`; the critical frequency when absent.
    pub omega: Option<f64>,
    pub lambda0: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Node count override (odd).
    pub n: Option<usize>,
    pub half_width: Option<f64>,
    pub scheme: Scheme,
    pub observer_stride: usize,
    pub conservation_abort_threshold: f64,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Amplitude of seeded random noise added to the initial data of `evolve`.
    pub noise_amplitude: f64,
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub omega_points: usize,
    pub lambda_ladder: Vec<f64>,
    pub lambda_max: f64,
    pub p_list: Vec<f64>,
    pub gamma_list: Vec<f64>,
    /// Tube radius as a multiple of `‖Q‖_{H¹}`.
    pub tube_factor: f64,
    /// Required growth of the orbital distance in the instability run.
    pub growth_factor: f64,
    /// Allowed growth of the orbital distance in the control run.
    pub control_factor: f64,
    /// Also run the instability experiment with `-lambda0` (no verdict).
    pub exploratory_negative: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            p: 7.0,
            gamma: 1.0,
            omega: None,
            lambda0: 0.02,
            t_end: 30.0,
            dt: DEFAULT_DT,
            n: None,
            half_width: None,
            scheme: Scheme::StrangCn,
            observer_stride: DEFAULT_OBSERVER_STRIDE,
            conservation_abort_threshold: DEFAULT_ABORT_THRESHOLD,
            out_dir: PathBuf::from("dnls-out"),
            seed: 0,
            noise_amplitude: 0.0,
            omega_min: None,
            omega_max: None,
            omega_points: 41,
            lambda_ladder: vec![0.1, 0.05, 0.025, 0.0125],
            lambda_max: DEFAULT_LAMBDA_MAX,
            p_list: vec![6.0, 7.0, 9.0],
            gamma_list: vec![0.5, 1.0, 2.0],
            tube_factor: 0.5,
            growth_factor: 5.0,
            control_factor: 2.0,
            exploratory_negative: false,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub p: Option<f64>,
    pub gamma: Option<f64>,
    pub omega: Option<f64>,
    pub lambda0: Option<f64>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub n: Option<usize>,
    pub half_width: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub p_list: Option<Vec<f64>>,
    pub gamma_list: Option<Vec<f64>>,
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
}

/// Which command a configuration is validated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    CriticalFreq,
    Landscape,
    Spectrum,
    Evolve,
    Instability,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CriticalFreq => "critical-freq",
            Command::Landscape => "landscape",
            Command::Spectrum => "spectrum",
            Command::Evolve => "evolve",
            Command::Instability => "instability",
            Command::Sweep => "sweep",
        }
    }
}

fn parse_list(value: &str) -> std::result::Result<Vec<f64>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| format!("'{s}': {e}")))
        .collect()
}

impl RunConfig {
    /// Parses the flat key-value format on top of the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut config = Self::default();
        let mut problems = Vec::new();
        let mut seen = BTreeMap::new();
        for (number, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                problems.push(format!("line {}: expected 'key = value', got '{line}'", number + 1));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if let Some(previous) = seen.insert(key.to_string(), number + 1) {
                problems.push(format!("line {}: key '{key}' already set on line {previous}", number + 1));
            }
            if let Err(message) = config.set(key, value) {
                problems.push(format!("line {}: {message}", number + 1));
            }
        }
        if problems.is_empty() {
            Ok(config)
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            value.parse::<T>().map_err(|e| format!("{key}: cannot parse '{value}': {e}"))
        }
        let opt_f64 = |value: &str| -> std::result::Result<Option<f64>, String> {
            if value.eq_ignore_ascii_case("none") || value.is_empty() {
                Ok(None)
            } else {
                num::<f64>(key, value).map(Some)
            }
        };
        match key {
            "p" => self.p = num(key, value)?,
            "gamma" => self.gamma = num(key, value)?,
            "omega" => self.omega = opt_f64(value)?,
            "lambda0" => self.lambda0 = num(key, value)?,
            "t_end" => self.t_end = num(key, value)?,
            "dt" => self.dt = num(key, value)?,
            "n" => {
                self.n = if value.eq_ignore_ascii_case("none") { None } else { Some(num(key, value)?) };
            }
            "half_width" => self.half_width = opt_f64(value)?,
            "scheme" => {
                self.scheme = match value.to_ascii_lowercase().as_str() {
                    "strang_cn" | "strang-cn" | "strang" => Scheme::StrangCn,
                    "midpoint" => Scheme::Midpoint,
                    other => return Err(format!("scheme: expected strang_cn or midpoint, got '{other}'")),
                }
            }
            "observer_stride" => self.observer_stride = num(key, value)?,
            "conservation_abort_threshold" => self.conservation_abort_threshold = num(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "seed" => self.seed = num(key, value)?,
            "noise_amplitude" => self.noise_amplitude = num(key, value)?,
            "omega_min" => self.omega_min = opt_f64(value)?,
            "omega_max" => self.omega_max = opt_f64(value)?,
            "omega_points" => self.omega_points = num(key, value)?,
            "lambda_ladder" => self.lambda_ladder = parse_list(value).map_err(|e| format!("lambda_ladder: {e}"))?,
            "lambda_max" => self.lambda_max = num(key, value)?,
            "p_list" => self.p_list = parse_list(value).map_err(|e| format!("p_list: {e}"))?,
            "gamma_list" => self.gamma_list = parse_list(value).map_err(|e| format!("gamma_list: {e}"))?,
            "tube_factor" => self.tube_factor = num(key, value)?,
            "growth_factor" => self.growth_factor = num(key, value)?,
            "control_factor" => self.control_factor = num(key, value)?,
            "exploratory_negative" => self.exploratory_negative = num(key, value)?,
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = o.$field.clone() { self.$field = v; } )* };
        }
        take!(p, gamma, lambda0, t_end, dt, out_dir, seed, p_list, gamma_list);
        if o.omega.is_some() {
            self.omega = o.omega;
        }
        if o.n.is_some() {
            self.n = o.n;
        }
        if o.half_width.is_some() {
            self.half_width = o.half_width;
        }
        if o.omega_min.is_some() {
            self.omega_min = o.omega_min;
        }
        if o.omega_max.is_some() {
            self.omega_max = o.omega_max;
        }
    }

    /// Checks every field used by `command`, reporting all violations at once.
    pub fn validate(&self, command: Command) -> Result<()> {
        let mut problems = Vec::new();
        let finite_positive = |name: &str, v: f64, problems: &mut Vec<String>| {
            if !(v.is_finite() && v > 0.0) {
                problems.push(format!("{name} must be a positive finite number, got {v}"));
            }
        };
        if !(self.p.is_finite() && self.p > 1.0) {
            problems.push(format!("p must be a finite number > 1, got {}", self.p));
        }
        finite_positive("gamma", self.gamma, &mut problems);
        if let Some(w) = self.omega {
            if !(w.is_finite() && 4.0 * w > self.gamma * self.gamma) {
                problems.push(format!("omega must satisfy 4*omega > gamma^2, got omega = {w}, gamma = {}", self.gamma));
            }
        }
        if let Some(n) = self.n {
            if n < 5 || n % 2 == 0 {
                problems.push(format!("n must be odd and at least 5, got {n}"));
            }
        }
        if let Some(l) = self.half_width {
            finite_positive("half_width", l, &mut problems);
        }
        finite_positive("lambda_max", self.lambda_max, &mut problems);
        finite_positive("tube_factor", self.tube_factor, &mut problems);
        match command {
            Command::Evolve | Command::Instability => {
                finite_positive("dt", self.dt, &mut problems);
                finite_positive("t_end", self.t_end, &mut problems);
                if self.observer_stride == 0 {
                    problems.push("observer_stride must be at least 1".into());
                }
                finite_positive("conservation_abort_threshold", self.conservation_abort_threshold, &mut problems);
                if self.dt > 0.0 && self.t_end > 0.0 {
                    let ratio = self.t_end / self.dt;
                    if (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) {
                        problems.push(format!("t_end = {} is not an integer multiple of dt = {}", self.t_end, self.dt));
                    }
                }
                if !(self.lambda0.abs() <= self.lambda_max) {
                    problems.push(format!(
                        "|lambda0| must not exceed lambda_max = {}, got {}",
                        self.lambda_max, self.lambda0
                    ));
                }
                if !(self.noise_amplitude.is_finite() && self.noise_amplitude >= 0.0) {
                    problems.push(format!("noise_amplitude must be non-negative, got {}", self.noise_amplitude));
                }
            }
            _ => {}
        }
        match command {
            Command::Instability => {
                if !(self.lambda0 > 0.0 && self.lambda0 <= 0.05) {
                    problems.push(format!("lambda0 must lie in (0, 0.05], got {}", self.lambda0));
                }
                if !(self.growth_factor > 1.0) {
                    problems.push(format!("growth_factor must exceed 1, got {}", self.growth_factor));
                }
                if !(self.control_factor > 1.0) {
                    problems.push(format!("control_factor must exceed 1, got {}", self.control_factor));
                }
            }
            Command::Landscape => {
                if self.omega_points < 3 {
                    problems.push(format!("omega_points must be at least 3, got {}", self.omega_points));
                }
                if let (Some(a), Some(b)) = (self.omega_min, self.omega_max) {
                    if !(a < b) {
                        problems.push(format!("omega_min must be below omega_max, got [{a}, {b}]"));
                    }
                }
                if let Some(a) = self.omega_min {
                    if !(4.0 * a > self.gamma * self.gamma) {
                        problems.push(format!("omega_min must satisfy 4*omega > gamma^2, got {a}"));
                    }
                }
                if self.lambda_ladder.iter().filter(|l| **l != 0.0).count() < 2 {
                    problems.push("lambda_ladder needs at least two non-zero values".into());
                }
                if self.lambda_ladder.iter().any(|l| !(l.abs() <= self.lambda_max)) {
                    problems.push(format!("lambda_ladder values must not exceed lambda_max = {}", self.lambda_max));
                }
            }
            Command::Sweep => {
                if self.p_list.is_empty() || self.gamma_list.is_empty() {
                    problems.push("p_list and gamma_list must be non-empty".into());
                }
                for &p in &self.p_list {
                    if !(p.is_finite() && p > 1.0) {
                        problems.push(format!("p_list entry must be a finite number > 1, got {p}"));
                    }
                }
                for &g in &self.gamma_list {
                    if !(g.is_finite() && g > 0.0) {
                        problems.push(format!("gamma_list entry must be positive, got {g}"));
                    }
                }
            }
            _ => {}
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.p, self.gamma)
    }

    /// Grid for `omega` at `resolution`, honouring the `n` and `half_width` overrides.
    pub fn grid(&self, omega: f64, resolution: Resolution) -> Result<Grid> {
        let half_width = self.half_width.unwrap_or_else(|| Grid::default_half_width(self.gamma, omega));
        match self.n {
            Some(n) => Grid::new(half_width, n),
            None => {
                let h = 1.0 / (omega.sqrt() * resolution.nodes_per_decay_length());
                let half_cells = (half_width / h).ceil() as usize;
                Grid::new(half_width, 2 * half_cells.max(2) + 1)
            }
        }
    }

    pub fn solver(&self, reference_omega: f64) -> SolverConfig {
        SolverConfig {
            dt: self.dt,
            t_end: self.t_end,
            scheme: self.scheme,
            observer_stride: self.observer_stride,
            conservation_abort_threshold: self.conservation_abort_threshold,
            nonlinearity: Nonlinearity::On,
            reference_omega,
            backward: false,
            snapshot_stride: None,
        }
    }

    /// Renders the configuration in the file format (round-trips through [`RunConfig::from_text`]).
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x:?}"));
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let scheme = match self.scheme {
            Scheme::StrangCn => "strang_cn",
            Scheme::Midpoint => "midpoint",
        };
        [
            format!("p = {:?}", self.p),
            format!("gamma = {:?}", self.gamma),
            format!("omega = {}", opt(self.omega)),
            format!("lambda0 = {:?}", self.lambda0),
            format!("t_end = {:?}", self.t_end),
            format!("dt = {:?}", self.dt),
            format!("n = {}", self.n.map_or("none".to_string(), |n| n.to_string())),
            format!("half_width = {}", opt(self.half_width)),
            format!("scheme = {scheme}"),
            format!("observer_stride = {}", self.observer_stride),
            format!("conservation_abort_threshold = {:?}", self.conservation_abort_threshold),
            format!("out_dir = {}", self.out_dir.display()),
            format!("seed = {}", self.seed),
            format!("noise_amplitude = {:?}", self.noise_amplitude),
            format!("omega_min = {}", opt(self.omega_min)),
            format!("omega_max = {}", opt(self.omega_max)),
            format!("omega_points = {}", self.omega_points),
            format!("lambda_ladder = {}", list(&self.lambda_ladder)),
            format!("lambda_max = {:?}", self.lambda_max),
            format!("p_list = {}", list(&self.p_list)),
            format!("gamma_list = {}", list(&self.gamma_list)),
            format!("tube_factor = {:?}", self.tube_factor),
            format!("growth_factor = {:?}", self.growth_factor),
            format!("control_factor = {:?}", self.control_factor),
            format!("exploratory_negative = {}", self.exploratory_negative),
        ]
        .join("\n")
            + "\n"
    }
}
