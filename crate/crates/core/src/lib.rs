//! Numerical workbench for weighted logarithmic potential theory.
//!
//! The crate computes equilibrium measures of curve systems in harmonic
//! external fields, searches for S-curves by maximizing the equilibrium
//! energy over a family of contours, builds the quadratic differential
//! `-R(z) dz^2` attached to a critical measure and cross-checks all of it
//! against independently computed complex orthogonal polynomials.
//!
//! Module map:
//!
//! * [`measures`] discrete measures, potentials, energies and the inner
//!   equilibrium solver.
//! * [`fields`] external fields (zero, logarithmic charges, polynomial).
//! * [`contours`] curve systems, Hausdorff distance and A-variations.
//! * [`scurve`] the max-min energy search and its residual diagnostics.
//! * [`quaddiff`] `R(z)`, trajectories, periods and Chebotarev continua.
//! * [`orthopoly`] Padé denominators, varying-weight orthogonal
//!   polynomials, Heine-Stieltjes polynomials, zero distributions.
//! * [`szego`] the single-interval electrostatic Bernstein-Szegő model.
//! * [`cli`] scenario runner used by the `scurves` binary.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod contours;
pub mod error;
pub mod fields;
pub mod measures;
pub mod mp;
pub mod orthopoly;
pub mod par;
pub mod poly;
pub mod quad;
pub mod quaddiff;
pub mod scurve;
pub mod szego;

pub use error::{Error, Result};

/// Complex double used throughout the floating-point parts of the crate.
pub type C64 = num_complex::Complex64;

/// Shorthand constructor for [`C64`].
#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
