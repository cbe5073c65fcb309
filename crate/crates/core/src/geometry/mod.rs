//! Metrics on the end chart and their curvature.

mod curvature;
mod decay;
mod grid;
mod metric;

pub use curvature::{
    christoffel_first_kind, default_step, metric_gradient, metric_hessian, ricci_tensor_fd,
    ricci_trace, scalar_curvature_bartnik, scalar_curvature_conformal, tensor_norm, Christoffel,
};
pub use decay::{decay_audit, DecayOrder, DecayReport, DECAY_SLACK};
pub use grid::{Grid, Tier, TensorField};
pub use metric::{
    conformal_power, pullback, radius, rotated, DecayBudget, Family, MetricSpec, Perturbation,
    PointEval, RadialComponents, RadialEval, ScalarFn, TensorEval,
};
