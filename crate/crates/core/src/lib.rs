//! Entropy minimization for density operators on `[0,1]` with prescribed
//! local density and kinetic-energy profiles.
//!
//! The crate is `no_std` (it needs `alloc`). Enable the `std` feature to let
//! nalgebra use its blocked matrix product.
//!
//! Module map:
//! - [`grid`]: mesh, quadrature, discrete gradients, free Hamiltonian.
//! - [`operator`]: density matrices, entropies, Gibbs maps, moment maps.
//! - [`gauge`]: removal and restoration of a prescribed current.
//! - [`volterra`]: second-kind Volterra equations and their adjoints.
//! - [`dual`]: the concave dual and its Newton solver.
//! - [`presets`], [`sampling`]: named instances and random states.
//! - [`characterization`]: multiplier field, potential, the form `Q` and the
//!   eigenvalue diagnostics built on a computed minimizer.
#![no_std]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod characterization;
pub mod dual;
mod error;
pub mod gauge;
pub mod grid;
pub mod num;
pub mod operator;
pub mod presets;
pub mod sampling;
pub mod volterra;

pub use error::{Error, Result};
pub use nalgebra::{Complex, DMatrix, DVector};

/// Complex scalar used for density matrices and complex fields.
pub type C64 = Complex<f64>;
