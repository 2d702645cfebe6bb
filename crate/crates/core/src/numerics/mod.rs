//! Grids, fields, quadrature, root finding and tridiagonal linear algebra.

pub mod grid;
pub mod quad;
pub mod roots;
pub mod tridiag;

pub use grid::{
    dx_norm, h1_norm, inner_product, l2_norm, point_value_at_zero, ComplexField, Field, Grid, RealField, Resolution,
};
pub use quad::{adaptive_quad, sech_pow, sech_power_tail};
pub use roots::bracketed_root;
