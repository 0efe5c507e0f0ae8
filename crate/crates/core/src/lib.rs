//! Discrete solver for the double-phase Dirichlet eigenvalue problem
//!
//! ```text
//! -div(a(x)|∇u|^{p-2}∇u + |∇u|^{q-2}∇u) = λ a(x)|u|^{p-2}u  in Ω,  u = 0 on ∂Ω
//! ```
//!
//! on uniform box grids: modular functionals and the Luxemburg norm, the
//! principal value `λ̂₁` of the Rayleigh quotient, Nehari-manifold
//! minimization for `λ > λ̂₁`, and nonexistence certificates for `λ ≤ λ̂₁`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
mod descent;
pub mod error;
pub mod grid;
mod linalg;
pub mod modular;
pub mod nehari;
pub mod operator;
pub mod props;
pub mod sample;
pub mod spectrum;

pub use error::{Error, Result};
pub use grid::{build_grid, gradient, integrate_cells, nodal_to_cell, GradientField, Grid, GridSpec, ScalarField};
pub use modular::{DoublePhase, Exponents, Weight, WeightFamily};
pub use nehari::{
    extract_eigenpair, fiber_map, minimize_multistart, minimize_on_nehari, nehari_project, Eigenpair,
    MinimizerResult, NehariOptions, NehariPoint,
};
pub use operator::{phi_lambda, phi_prime_pairing, residual, Problem};
pub use spectrum::{
    lambda_star_curve, nonexistence_certificate, principal_eigenvalue, rayleigh_quotient, EigenOptions, EigenResult,
};
