//! Numerical pipeline for recovering a Schrodinger potential from boundary
//! spectral data of the Neumann operator `L = -laplace + q`.
//!
//! The crate is organised around the stages of the recovery procedure:
//!
//! - [`geometry`]: domains, grids, boundary parameterisation and quadrature.
//! - [`operator`]: finite-difference assembly of `L`, eigenproblem and
//!   Neumann boundary-value solves.
//! - [`spectral`]: synthesis of the boundary spectral function
//!   `theta(s,s,lambda)`, extraction of eigenvalues and squared traces from
//!   its jumps, resolvent kernel and Neumann-to-Dirichlet maps.
//! - [`sign`]: recovery of a signed boundary trace from its square by
//!   vanishing-order parity continuation along the closed boundary curve.
//! - [`inverse`]: Green-identity orthogonality probes, data
//!   distinguishability experiments and a damped Gauss-Newton fit of the
//!   potential.
//!
//! The crate is `no_std` (with `alloc`); all file formats, configuration and
//! orchestration live in the companion CLI crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod error;
pub mod geometry;
pub mod inverse;
pub mod linalg;
pub mod operator;
pub mod sign;
pub mod spectral;

pub use error::Error;
