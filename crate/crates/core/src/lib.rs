//! Numerical toolkit for asymptotically flat ends.
//!
//! The crate computes scalar curvature and ADM mass of closed-form end metrics,
//! solves the conformal-factor equation `Δ_g u − f u = 0` by exhaustion on
//! domains with a toy "arbitrary" end, deforms metrics to asymptotically
//! Schwarzschild form, and audits the Lohkamp flattening and the ALE covering
//! constructions.
//!
//! Modules:
//! - [`geometry`]: metric families, finite-difference curvature, decay audits.
//! - [`adm`]: surface integrals, extrapolated mass, ALE normalization.
//! - [`elliptic`]: radial-tier solver, Sobolev and eigenvalue estimates.
//! - [`density`]: Schwarzschild splitting, interpolation, conformal correction,
//!   rigidity probes.
//! - [`compactification`]: Lohkamp cutoff, torus gluing, group actions.

pub mod adm;
pub mod compactification;
pub mod cutoff;
pub mod density;
pub mod elliptic;
mod error;
pub mod geometry;
pub mod quadrature;

pub use error::{Error, Result};
