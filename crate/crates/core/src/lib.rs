//! Numerical laboratory for the focusing nonlinear Schrödinger equation with an
//! attractive delta potential,
//!
//! ```text
//! i u_t + u_xx + gamma * delta(x) u + |u|^(p-1) u = 0,
//! ```
//!
//! at the degenerate critical frequency `Omega(p, gamma)` where `d''(Omega) = 0`.
//!
//! The crate provides the explicit soliton family and its frequency derivative,
//! the critical frequency and the derivatives of the action landscape `d(omega)`,
//! the linearised operators and their low-lying spectrum, a conservative
//! split-step solver, the modulation decomposition with its virial functional,
//! and the experiment drivers behind the `dnls` command-line tool.

// Negated comparisons such as `!(x > 0.0)` are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evolution;
pub mod experiment;
pub mod functionals;
pub mod modulation;
pub mod numerics;
pub mod profiles;
pub mod soliton;
pub mod spectrum;

pub use error::{Error, Result};
