//! Neumann data mass of Dirichlet eigenfunctions on simplices.
//!
//! For a Dirichlet eigenfunction `-h^2 Delta u = u` on a non-degenerate
//! simplex `T` in R^n with `||u||_{L^2} = 1`, the semiclassical Neumann mass
//! on every face `G` is exactly
//!
//! ```text
//!   int_G |h d_nu u|^2 dS = 2 Vol_{n-1}(G) / (n Vol_n(T)),
//! ```
//!
//! independent of the eigenfunction. This crate verifies the identity two
//! ways (closed-form modes on order simplices with high-order quadrature, and
//! a P1 finite-element pipeline on arbitrary simplices and coefficient
//! matrices), and implements the inverse problems it suggests: recovering a
//! triangle from its three Neumann masses, recovering a 2x2 coefficient
//! matrix in closed form, and the explicit 3x3 family showing the masses do
//! not determine the coefficients in higher dimension.

pub mod error;
pub mod exact_modes;
pub mod fem;
pub mod geometry;
pub mod inverse;
pub mod quadrature;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{EllipticCoefficients, Face, Simplex, SimplexJson};

// Downstream users build coefficient matrices with the same nalgebra version.
pub use nalgebra;
