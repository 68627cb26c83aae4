//! Planar point-vortex dynamics and its reduction by the symmetry group SE(2).
//!
//! The crate follows the reduction pipeline step by step:
//!
//! * [`vortex`]: the unreduced N-vortex system (velocity field, Hamiltonian,
//!   linear impulse, full-plane simulation).
//! * [`reduction`]: translation-reduced shape coordinates, the circulation
//!   matrix `K`, the angular impulse `R` and the momentum map `J(z) = i z z*`.
//! * [`algebra`]: the vortex algebra with bracket `[a, b]_K = a K⁻¹ b - b K⁻¹ a`,
//!   coadjoint actions, Casimirs and the collective Hamiltonian.
//! * [`flow`]: the Lie–Poisson equation on the dual algebra, the explicit
//!   three-vortex shape system, period detection and level-set grids.
//!
//! [`matrix`] and [`ode`] provide the small dense linear algebra and the
//! adaptive integrator the rest builds on.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod error;
pub mod flow;
pub mod levelset;
pub mod matrix;
pub mod ode;
pub mod reduction;
pub mod vortex;

pub use error::{Error, IntegrationError, IntegrationFailure, Result};
pub use num_complex::Complex64;
