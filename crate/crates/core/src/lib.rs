//! Conformal generators of the free massless scalar field on a spectral lattice.
//!
//! Momentum-space one-particle wavefunctions (non-covariant normalization) are the
//! primary representation. Every generator is a [`spectral::Operator`] built from
//! multiplications in momentum space and in Newton-Wigner-Pryce coordinate space,
//! with base changes inserted between them. The [`harness`] module turns the
//! commutation relations, product identities, kernel formulas and covariance laws
//! into residual reports.

pub mod actions;
pub mod error;
pub mod exec;
pub mod generators;
pub mod harness;
pub mod kernels;
pub mod lattice;
pub mod localization;
pub mod spectral;

pub use error::{Error, Result};
pub use lattice::{CoordinateState, FockSum, GridSpec, MomentumState, Normalization};
pub use num_complex::Complex64;

/// Spatial vectors are stored with three components; unused trailing components are zero.
pub type Vec3 = [f64; 3];
