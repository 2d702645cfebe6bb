//! Error type shared by every layer of the crate.

use thiserror::Error;

use crate::evolution::TimeSeries;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model or numerical parameter lies outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// 4ω ≤ γ²: the soliton branch does not exist there.
    #[error("no solitary wave for omega = {omega} with gamma = {gamma} (requires 4*omega > gamma^2)")]
    NoSolitaryWave { omega: f64, gamma: f64 },

    /// The critical frequency only exists for p > 5.
    #[error(
        "p = {p} lies in the stable range 1 < p <= 5, where every solitary wave is orbitally stable; \
         the degenerate critical frequency requires p > 5"
    )]
    StableRange { p: f64 },

    #[error("grid mismatch: fields live on different grids")]
    GridMismatch,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field contains non-finite values")]
    NonFinite,

    #[error("adaptive quadrature did not converge on [{a}, {b}]: estimated error {error:e} > tolerance {tol:e}")]
    QuadratureNotConverged { a: f64, b: f64, error: f64, tol: f64 },

    #[error("no sign change in bracket [{lo}, {hi}] (f(lo) = {f_lo:e}, f(hi) = {f_hi:e})")]
    Bracketing { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("finite-difference step underflows the existence range at omega = {omega} (step {step:e})")]
    StepUnderflow { omega: f64, step: f64 },

    #[error("third-derivative routes disagree: relative spread {spread:e} exceeds {tol:e}")]
    RouteDisagreement { spread: f64, tol: f64 },

    #[error("perturbation too large: |lambda| = {lambda} exceeds the mass-restoring range")]
    PerturbationTooLarge { lambda: f64 },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("iteration did not converge: {0}")]
    NotConverged(String),

    #[error("linearised operator has {n_negative} negative eigenvalues, expected exactly one")]
    StructureViolation { n_negative: usize },

    #[error("constrained coercivity constant is not positive: kappa = {kappa:e}")]
    CoercivityViolation { kappa: f64 },

    #[error("modulation decomposition failed: {0}")]
    DecompositionFailure(String),

    #[error("evolution aborted at t = {time}: {reason}")]
    EvolutionAborted { time: f64, reason: String, partial: Box<TimeSeries> },

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    InvalidConfig(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the caller's inputs rather than by a numerical failure.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::NoSolitaryWave { .. }
                | Error::StableRange { .. }
                | Error::InvalidGrid(_)
                | Error::InvalidConfig(_)
                | Error::PerturbationTooLarge { .. }
        )
    }
}
