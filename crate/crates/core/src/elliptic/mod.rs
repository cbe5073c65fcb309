//! Exhaustion solver for `Δ_g u − f u = 0`, Sobolev and eigenvalue estimates.
//!
//! Every problem is solved on the radial tier: a spherically symmetric end
//! `α(r)² dr² + β(r)² dΩ²` discretized by finite volumes on a log-spaced
//! mesh, optionally continued by a finite cylinder standing in for an
//! arbitrary end.

mod domain;
mod eigen;
mod solver;
mod sobolev;
mod tridiag;

pub use domain::{DomainModel, RadialCoefficients, RadialMesh, ToyEnd};
pub use eigen::{eigenvalue_lower_bound, EigenBoundary, EigenDomain, EigenReport};
pub use solver::{
    check_smallness, solve_conformal_factor, solve_truncated, ConformalFactorSolution,
    DiagnosticRecord, EllipticProblem, OuterCondition, Potential, SmallnessReport,
    TruncatedSolution,
};
pub use sobolev::{sobolev_estimate, SobolevDomain, SobolevOptions, SobolevReport};
pub use tridiag::SymTridiag;
