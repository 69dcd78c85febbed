//! Symplectic products of star-shaped planar domains, made computable.
//!
//! - [`geometry2d`]: radial profiles, gauges and cumulative sector area.
//! - [`diskmap`]: the 1-homogeneous area-preserving map from a disk onto a
//!   profile, its product and the cut-off variant with the ε-sandwich check.
//! - [`product`]: p-products as gauge objects, Monte Carlo volume.
//! - [`dynamics`]: characteristic flows, ellipsoid Reeb flow and the conjugacy.
//! - [`capacities`]: ellipsoid capacity tables and the boundary-minimality experiment.
//! - [`fractal`]: Weierstrass-type functions and box-counting dimension.
//! - [`cli`]: the `symprod` command line.

// `!(x > 0.0)` is used on purpose throughout: it rejects NaN along with
// non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacities;
pub mod cli;
pub mod diskmap;
pub mod dynamics;
pub mod error;
pub mod fractal;
pub mod geometry2d;
pub mod product;
pub mod sampling;

pub use error::{Error, Result};

/// Crate version, stamped into every CSV and report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
