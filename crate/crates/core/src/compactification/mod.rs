//! Flattening an end with negative mass, gluing it into a torus chart, and the
//! finite-group covering constructions for ALE ends.

mod group;
mod lohkamp;
mod torus;

pub use group::{
    ale_lift, fixed_point_of_finite_group, AffineIsometry, AleLift, FixedPoint, GroupAction,
    GROUP_TOLERANCE,
};
pub use lohkamp::{
    check_superharmonic, lohkamp_cutoff, lohkamp_metric, ConcaveCutoff, HarmonicFactor,
    LohkampMetric, LohkampState, SuperharmonicAudit, SuperharmonicOptions, CURVATURE_FLOOR,
    POSITIVE_WITNESS,
};
pub use torus::{torus_glue, TorusChart, TorusGlueSpec, TorusHeader};
