use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type RadialEval = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type PointEval = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type TensorEval = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Euclidean norm of a chart point.
pub fn radius(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Exponent `4/(n-2)` of the conformal factor in dimension `n`.
pub fn conformal_power(n: usize) -> f64 {
    4.0 / (n as f64 - 2.0)
}

/// A scalar function on the end chart, either radial or general.
#[derive(Clone)]
pub enum ScalarFn {
    Radial(RadialEval),
    General(PointEval),
}

impl ScalarFn {
    pub fn radial(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ScalarFn::Radial(Arc::new(f))
    }

    pub fn general(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarFn::General(Arc::new(f))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ScalarFn::Radial(f) => f(radius(x)),
            ScalarFn::General(f) => f(x),
        }
    }

    pub fn as_radial(&self) -> Option<&RadialEval> {
        match self {
            ScalarFn::Radial(f) => Some(f),
            ScalarFn::General(_) => None,
        }
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFn::Radial(_) => f.write_str("ScalarFn::Radial(..)"),
            ScalarFn::General(_) => f.write_str("ScalarFn::General(..)"),
        }
    }
}

/// Additive perturbation `h_ij` of a base metric.
///
/// The radial form is `iso(r) δ_ij + normal(r) x̂_i x̂_j`, which is the most
/// general spherically symmetric symmetric 2-tensor on the chart.
#[derive(Clone)]
pub enum Perturbation {
    Radial { iso: RadialEval, normal: RadialEval },
    General(TensorEval),
}

impl Perturbation {
    pub fn radial(
        iso: impl Fn(f64) -> f64 + Send + Sync + 'static,
        normal: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Perturbation::Radial {
            iso: Arc::new(iso),
            normal: Arc::new(normal),
        }
    }

    pub fn general(f: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        Perturbation::General(Arc::new(f))
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        match self {
            Perturbation::Radial { iso, normal } => {
                let r = radius(x);
                radial_tensor(x, r, iso(r), normal(r))
            }
            Perturbation::General(f) => f(x),
        }
    }
}

impl fmt::Debug for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Perturbation::Radial { .. } => f.write_str("Perturbation::Radial(..)"),
            Perturbation::General(_) => f.write_str("Perturbation::General(..)"),
        }
    }
}

fn radial_tensor(x: &[f64], r: f64, iso: f64, normal: f64) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { iso } else { 0.0 };
        delta + normal * x[i] * x[j] / (r * r)
    })
}

/// Spherically symmetric components: `g = iso(r) δ + normal(r) x̂ x̂ᵀ`.
///
/// In polar form this is `(iso + normal) dr² + iso r² dΩ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialComponents {
    pub iso: f64,
    pub normal: f64,
}

impl RadialComponents {
    pub fn g_rr(&self) -> f64 {
        self.iso + self.normal
    }

    /// Areal radius `r sqrt(iso)` of the coordinate sphere of radius `r`.
    pub fn areal_radius(&self, r: f64) -> f64 {
        r * self.iso.sqrt()
    }
}

/// Declared decay orders (as powers of r) for `|h|`, `|∂h|`, `|∂∂h|`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DecayBudget {
    pub h: f64,
    pub dh: f64,
    pub ddh: f64,
}

impl DecayBudget {
    /// The asymptotically flat budget `|h| + r|∂h| + r²|∂∂h| ≤ C r^{2-n}`.
    pub fn asymptotically_flat(n: usize) -> Self {
        let base = 2.0 - n as f64;
        Self {
            h: base,
            dh: base - 1.0,
            ddh: base - 2.0,
        }
    }

    /// Budget shifted by `shift` powers of r (e.g. `-1` for an `r^{1-n}` remainder).
    pub fn shifted(self, shift: f64) -> Self {
        Self {
            h: self.h + shift,
            dh: self.dh + shift,
            ddh: self.ddh + shift,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Family {
    Euclidean,
    Schwarzschild { mass: f64 },
    /// `u^{4/(n-2)} δ`.
    ConformallyFlat { factor: ScalarFn },
    /// `base + h`.
    Perturbed {
        base: Arc<MetricSpec>,
        perturbation: Perturbation,
    },
    /// `φ^{4/(n-2)} base`.
    Composite { base: Arc<MetricSpec>, factor: ScalarFn },
}

/// A closed-form Riemannian metric on the end chart `ℝⁿ \ B̄_{inner}`.
#[derive(Clone, Debug)]
pub struct MetricSpec {
    dim: usize,
    family: Family,
    decay: DecayBudget,
    scalar_decay: f64,
    inner_radius: f64,
}

impl MetricSpec {
    fn with_family(dim: usize, family: Family) -> Self {
        Self {
            dim,
            family,
            decay: DecayBudget::asymptotically_flat(dim),
            scalar_decay: dim as f64 + 1.0,
            inner_radius: 1.0,
        }
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::with_family(dim, Family::Euclidean)
    }

    pub fn schwarzschild(dim: usize, mass: f64) -> Self {
        Self::with_family(dim, Family::Schwarzschild { mass })
    }

    pub fn conformally_flat(dim: usize, factor: ScalarFn) -> Self {
        Self::with_family(dim, Family::ConformallyFlat { factor })
    }

    pub fn perturbed(base: MetricSpec, perturbation: Perturbation) -> Self {
        let mut spec = Self::with_family(
            base.dim,
            Family::Perturbed {
                base: Arc::new(base.clone()),
                perturbation,
            },
        );
        spec.decay = base.decay;
        spec.scalar_decay = base.scalar_decay;
        spec.inner_radius = base.inner_radius;
        spec
    }

    pub fn composite(base: MetricSpec, factor: ScalarFn) -> Self {
        let mut spec = Self::with_family(
            base.dim,
            Family::Composite {
                base: Arc::new(base.clone()),
                factor,
            },
        );
        spec.decay = base.decay;
        spec.scalar_decay = base.scalar_decay;
        spec.inner_radius = base.inner_radius;
        spec
    }

    pub fn with_decay(mut self, decay: DecayBudget) -> Self {
        self.decay = decay;
        self
    }

    pub fn with_scalar_decay(mut self, q: f64) -> Self {
        self.scalar_decay = q;
        self
    }

    /// Radius of the excised ball; stencils must stay strictly outside it.
    pub fn with_inner_radius(mut self, inner: f64) -> Self {
        self.inner_radius = inner;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn decay(&self) -> DecayBudget {
        self.decay
    }

    pub fn scalar_decay(&self) -> f64 {
        self.scalar_decay
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    pub fn family_tag(&self) -> &'static str {
        match self.family {
            Family::Euclidean => "euclidean",
            Family::Schwarzschild { .. } => "schwarzschild",
            Family::ConformallyFlat { .. } => "conformally_flat",
            Family::Perturbed { .. } => "perturbed",
            Family::Composite { .. } => "composite",
        }
    }

    /// Metric components `g_ij(x)`.
    pub fn components(&self, x: &[f64]) -> DMatrix<f64> {
        debug_assert_eq!(x.len(), self.dim);
        let n = self.dim;
        match &self.family {
            Family::Euclidean => DMatrix::identity(n, n),
            Family::Schwarzschild { mass } => {
                let r = radius(x);
                let phi = 1.0 + mass / (2.0 * r.powi(n as i32 - 2));
                DMatrix::identity(n, n) * phi.powf(conformal_power(n))
            }
            Family::ConformallyFlat { factor } => {
                DMatrix::identity(n, n) * factor.eval(x).powf(conformal_power(n))
            }
            Family::Perturbed { base, perturbation } => {
                base.components(x) + perturbation.eval(x)
            }
            Family::Composite { base, factor } => {
                base.components(x) * factor.eval(x).powf(conformal_power(n))
            }
        }
    }

    /// Components in spherically symmetric form, when the metric has that symmetry.
    pub fn radial_components(&self, r: f64) -> Option<RadialComponents> {
        let n = self.dim;
        match &self.family {
            Family::Euclidean => Some(RadialComponents {
                iso: 1.0,
                normal: 0.0,
            }),
            Family::Schwarzschild { mass } => {
                let phi = 1.0 + mass / (2.0 * r.powi(n as i32 - 2));
                Some(RadialComponents {
                    iso: phi.powf(conformal_power(n)),
                    normal: 0.0,
                })
            }
            Family::ConformallyFlat { factor } => factor.as_radial().map(|u| RadialComponents {
                iso: u(r).powf(conformal_power(n)),
                normal: 0.0,
            }),
            Family::Perturbed { base, perturbation } => match perturbation {
                Perturbation::Radial { iso, normal } => {
                    base.radial_components(r).map(|b| RadialComponents {
                        iso: b.iso + iso(r),
                        normal: b.normal + normal(r),
                    })
                }
                Perturbation::General(_) => None,
            },
            Family::Composite { base, factor } => {
                let phi = factor.as_radial()?;
                let scale = phi(r).powf(conformal_power(n));
                base.radial_components(r).map(|b| RadialComponents {
                    iso: b.iso * scale,
                    normal: b.normal * scale,
                })
            }
        }
    }

    pub fn is_spherically_symmetric(&self) -> bool {
        self.radial_components(2.0).is_some()
    }

    /// Checks symmetry and positive-definiteness at a sample point.
    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        let g = self.components(x);
        let scale = g.amax().max(1.0);
        for i in 0..self.dim {
            for j in 0..i {
                if (g[(i, j)] - g[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::Degenerate {
                        point: x.to_vec(),
                        detail: format!("g is not symmetric in ({i},{j})"),
                    });
                }
            }
        }
        let eig = g.symmetric_eigenvalues();
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::Degenerate {
                point: x.to_vec(),
                detail: format!("smallest eigenvalue {min:.3e} is not positive"),
            });
        }
        Ok(())
    }
}

/// Pull back a metric by a linear map: `(Tᵀ g(Tx) T)`.
pub fn pullback(metric: &MetricSpec, t: &DMatrix<f64>, x: &[f64]) -> DMatrix<f64> {
    let tx = t * nalgebra::DVector::from_column_slice(x);
    t.transpose() * metric.components(tx.as_slice()) * t
}

/// The metric `x ↦ Qᵀ g(Qx) Q` for a fixed orthogonal `Q`.
pub fn rotated(metric: &MetricSpec, q: DMatrix<f64>) -> MetricSpec {
    let base = metric.clone();
    let n = metric.dim();
    MetricSpec::perturbed(
        MetricSpec::euclidean(n).with_inner_radius(metric.inner_radius()),
        Perturbation::general(move |x| pullback(&base, &q, x) - DMatrix::identity(n, n)),
    )
    .with_decay(metric.decay())
    .with_scalar_decay(metric.scalar_decay())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schwarzschild_radial_form_matches_cartesian() {
        let g = MetricSpec::schwarzschild(3, 1.0);
        let x = [1.2, -0.7, 2.0];
        let r = radius(&x);
        let rc = g.radial_components(r).unwrap();
        let cart = g.components(&x);
        assert!((cart[(0, 0)] - rc.iso).abs() < 1e-15);
        assert_eq!(cart[(0, 1)], 0.0);
    }

    #[test]
    fn radial_perturbation_is_spherically_symmetric() {
        let g = MetricSpec::perturbed(
            MetricSpec::euclidean(3),
            Perturbation::radial(|r| 0.1 / r, |r| -0.1 / r),
        );
        assert!(g.is_spherically_symmetric());
        let x = [0.0, 3.0, 0.0];
        let m = g.components(&x);
        // tangential directions carry iso only, the normal direction iso + normal
        assert!((m[(0, 0)] - (1.0 + 0.1 / 3.0)).abs() < 1e-15);
        assert!((m[(1, 1)] - 1.0).abs() < 1e-15);
        g.check_point(&x).unwrap();
    }

    #[test]
    fn general_perturbation_breaks_symmetry_flag() {
        let g = MetricSpec::perturbed(
            MetricSpec::euclidean(3),
            Perturbation::general(|x| DMatrix::from_fn(3, 3, |i, j| 0.01 * x[i] * x[j])),
        );
        assert!(!g.is_spherically_symmetric());
    }

    #[test]
    fn degenerate_metric_is_rejected() {
        let g = MetricSpec::perturbed(
            MetricSpec::euclidean(3),
            Perturbation::radial(|_| -1.0, |_| 0.0),
        );
        assert!(matches!(
            g.check_point(&[2.0, 0.0, 0.0]),
            Err(Error::Degenerate { .. })
        ));
    }
}
