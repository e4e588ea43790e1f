//! Extremal holomorphic discs (complex geodesics) in complex ellipsoids
//! `E(p) = { z ∈ C^n : Σ |z_j|^{2p_j} < 1 }`.
//!
//! The crate evaluates and validates the explicit parametric family of
//! extremal maps, factors the self-inversive polynomials behind it, runs
//! Hardy-space diagnostics on boundary data, builds the boundary
//! functionals that pose two-point and point-direction problems, and
//! solves those problems with oracles to check the answers.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod boundary;
pub mod cli;
pub mod cx;
pub mod ellipsoid;
pub mod error;
pub mod extremal_map;
pub mod functionals;
pub mod lm;
pub mod poly;
pub mod polyfactor;
pub mod solver;

pub use cx::C64;
pub use ellipsoid::{Ellipsoid, Location, PointClassification};
pub use error::{Error, Result};
pub use extremal_map::ExtremalMapParams;

/// Version tag carried by every JSON document.
pub const SCHEMA: &str = "ellipso-geo/v1";
