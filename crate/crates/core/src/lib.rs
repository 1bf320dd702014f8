//! Robust bearing-only navigation in the planar circular restricted
//! three-body problem.
//!
//! The crate models the Earth–Moon dynamics and the bearing sensors as exact
//! linear fractional transformations of the two range parameters σ and ψ,
//! synthesizes a fixed observer gain with a bounded-real-lemma certificate
//! over the parameter box, and simulates the resulting closed loop.
//!
//! Numerical modules are generic over [`Real`] (`f32`/`f64`); the aliases
//! below fix the common `f64` instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod artifact;
pub mod cr3bp;
pub mod lft;
pub mod lmi;
pub mod numkernel;
pub mod ode;
pub mod plant;
pub mod runtime;
pub mod sensing;
pub mod scalar;
pub mod synthesis;

pub use scalar::Real;

pub type Matrix = numkernel::Matrix<f64>;
pub type Matrix32 = numkernel::Matrix<f32>;
pub type ComplexMatrix = numkernel::ComplexMatrix<f64>;
