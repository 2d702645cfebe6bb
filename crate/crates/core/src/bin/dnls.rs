use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dnls_core::experiment::{run, Command, Overrides, RunConfig, RunReport};
use dnls_core::Error;

/// Solitary waves of the 1D NLS with an attractive delta potential at the critical frequency.
#[derive(Parser, Debug)]
#[command(name = "dnls", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Critical frequency Omega with d'' and d''' there.
    CriticalFreq(Flags),
    /// Landscape table (omega, m, d', d'') and the cubic expansion of the action at Omega.
    Landscape(Flags),
    /// Spectral structure of L+ and L- and the constrained coercivity constant.
    Spectrum(Flags),
    /// Plain evolution of a perturbed soliton with optional seeded noise.
    Evolve(Flags),
    /// Tracked run from the critical soliton plus a stable-branch control run.
    Instability(Flags),
    /// Table of Omega, d''', kappa and n_negative over p and gamma lists.
    Sweep(Flags),
}

#[derive(Args, Debug, Clone)]
struct Flags {
    /// Key-value configuration file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lambda0: Option<f64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Number of grid nodes, overriding the automatic choice.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "half-width")]
    half_width: Option<f64>,
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated p values for `sweep`.
    #[arg(long = "p-list", value_delimiter = ',')]
    p_list: Option<Vec<f64>>,
    /// Comma-separated gamma values for `sweep`.
    #[arg(long = "gamma-list", value_delimiter = ',')]
    gamma_list: Option<Vec<f64>>,
    #[arg(long = "omega-min")]
    omega_min: Option<f64>,
    #[arg(long = "omega-max")]
    omega_max: Option<f64>,
    /// Exit with status 1 when any report check fails.
    #[arg(long)]
    strict: bool,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            p: self.p,
            gamma: self.gamma,
            omega: self.omega,
            lambda0: self.lambda0,
            t_end: self.t_end,
            dt: self.dt,
            n: self.n,
            half_width: self.half_width,
            out_dir: self.out_dir.clone(),
            seed: self.seed,
            p_list: self.p_list.clone(),
            gamma_list: self.gamma_list.clone(),
            omega_min: self.omega_min,
            omega_max: self.omega_max,
        }
    }
}

fn execute(command: Command, flags: &Flags) -> Result<RunReport, Error> {
    let mut config = match &flags.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    config.apply(&flags.overrides());
    let report = run(command, &config)?;
    let path = report.write_json(&config.out_dir)?;
    println!("report: {}", path.display());
    for file in &report.files {
        println!("file: {} ({} rows, sha256 {})", file.path, file.rows, file.sha256);
    }
    Ok(report)
}

fn print_summary(report: &RunReport) {
    if let Some(c) = &report.critical {
        println!("Omega = {:.16e}", c.omega_star);
    }
    if let Some(d) = &report.third_derivative {
        println!("d3(Omega) = {:.16e} (route spread {:.3e})", d.closed, d.spread);
    }
    if let Some(fit) = &report.cubic_expansion {
        println!(
            "cubic fit: exponent {:.6}, coefficient {:.6e} vs d3/6 = {:.6e}",
            fit.exponent, fit.coefficient, fit.predicted_coefficient
        );
    }
    if let Some(s) = &report.spectrum {
        println!("n_negative = {}, kernel residual {:.3e}, kappa = {:.6e}", s.n_negative, s.kernel_residual, s.kappa);
    }
    if let Some(v) = &report.instability {
        println!(
            "instability: growth {:.3}, tube exit {:?}, verdict {}",
            v.distance_growth, v.tube_exit_time, v.instability_verdict
        );
    }
    if let Some(c) = &report.control {
        println!("control at omega {:.6}: growth {:.4}, stable {}", c.omega, c.growth, c.stable_verdict);
    }
    for check in &report.checks {
        let status = if check.pass { "ok  " } else { "FAIL" };
        println!("{status} {}: {:.6e} (threshold {:.6e})", check.name, check.value, check.threshold);
    }
    for note in &report.notes {
        println!("note: {note}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match &cli.command {
        Sub::CriticalFreq(f) => (Command::CriticalFreq, f),
        Sub::Landscape(f) => (Command::Landscape, f),
        Sub::Spectrum(f) => (Command::Spectrum, f),
        Sub::Evolve(f) => (Command::Evolve, f),
        Sub::Instability(f) => (Command::Instability, f),
        Sub::Sweep(f) => (Command::Sweep, f),
    };
    match execute(command, flags) {
        Ok(report) => {
            print_summary(&report);
            if flags.strict && !report.all_checks_pass() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_invalid_input() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
