use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{conformal_power, radius, scalar_curvature_conformal, MetricSpec, ScalarFn};
use crate::quadrature::SphereRule;

/// Lower bound for sampled scalar curvature of the flattened metric.
pub const CURVATURE_FLOOR: f64 = -1e-8;
/// Threshold a sampled value must exceed to count as strictly positive curvature.
pub const POSITIVE_WITNESS: f64 = 1e-6;

/// Step of the sixth-order stencils applied to `u`.
const FD_STEP: f64 = 0.05;
const FIRST: [f64; 3] = [45.0 / 60.0, -9.0 / 60.0, 1.0 / 60.0];
const SECOND: [f64; 4] = [-490.0 / 180.0, 270.0 / 180.0, -27.0 / 180.0, 2.0 / 180.0];

/// Flat-harmonic factor `u = 1 + m/(2r^{n−2}) + d·x/rⁿ` on `ℝⁿ \ {0}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicFactor {
    pub dim: usize,
    pub mass: f64,
    pub dipole: Vec<f64>,
}

impl HarmonicFactor {
    pub fn new(dim: usize, mass: f64, dipole: Vec<f64>) -> Result<Self> {
        if dim < 3 {
            return Err(Error::config("harmonic factor needs n >= 3"));
        }
        if dipole.len() != dim {
            return Err(Error::config(format!(
                "dipole has {} entries, expected {dim}",
                dipole.len()
            )));
        }
        Ok(Self { dim, mass, dipole })
    }

    /// The Schwarzschild factor of mass `m`.
    pub fn monopole(dim: usize, mass: f64) -> Result<Self> {
        Self::new(dim, mass, vec![0.0; dim])
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let r = radius(x);
        let n = self.dim as i32;
        let dot: f64 = self.dipole.iter().zip(x).map(|(d, x)| d * x).sum();
        1.0 + self.mass / (2.0 * r.powi(n - 2)) + dot / r.powi(n)
    }

    fn dipole_norm(&self) -> f64 {
        radius(&self.dipole)
    }

    /// `sup_{|x|=r} u`, attained along the dipole direction.
    pub fn sup_on_sphere(&self, r: f64) -> f64 {
        let n = self.dim as i32;
        1.0 + self.mass / (2.0 * r.powi(n - 2)) + self.dipole_norm() / r.powi(n - 1)
    }

    /// `inf_{|x|=r} u`.
    pub fn inf_on_sphere(&self, r: f64) -> f64 {
        let n = self.dim as i32;
        1.0 + self.mass / (2.0 * r.powi(n - 2)) - self.dipole_norm() / r.powi(n - 1)
    }

    /// Point of the sphere of radius `r` where `u` is largest.
    pub fn sup_point(&self, r: f64) -> Vec<f64> {
        let d = self.dipole_norm();
        let mut x = vec![0.0; self.dim];
        if d > 0.0 {
            for (xi, di) in x.iter_mut().zip(&self.dipole) {
                *xi = r * di / d;
            }
        } else {
            x[0] = r;
        }
        x
    }
}

fn shifted(x: &[f64], k: usize, h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[k] += h;
    y
}

/// Sixth-order central gradient and Laplacian of `f` at `x`.
fn gradient_and_laplacian(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> (Vec<f64>, f64) {
    let centre = f(x);
    let mut grad = vec![0.0; x.len()];
    let mut lap = 0.0;
    for k in 0..x.len() {
        let mut d1 = 0.0;
        let mut d2 = SECOND[0] * centre;
        for j in 1..=3 {
            let jh = j as f64 * h;
            let p = f(&shifted(x, k, jh));
            let m = f(&shifted(x, k, -jh));
            d1 += FIRST[j - 1] * (p - m);
            d2 += SECOND[j] * (p + m);
        }
        grad[k] = d1 / h;
        lap += d2 / (h * h);
    }
    (grad, lap)
}

/// Concave `C²` cutoff: identity below `a = 1 − 3ε/4`, constant `1 − ε/2`
/// above `b = 1 − ε/4`.
///
/// On the transition, with `w = b − a = ε/2` and `x = (t − a)/w`,
/// `ζ = a + w(x − x³ + x⁴/2)`, so `ζ′ = 1 − 3x² + 2x³` and
/// `ζ″ = −6x(1 − x)/w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcaveCutoff {
    pub epsilon: f64,
    pub lower: f64,
    pub upper: f64,
    pub plateau: f64,
}

impl ConcaveCutoff {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::config(format!("cutoff needs 0 < ε < 1, got {epsilon}")));
        }
        Ok(Self {
            epsilon,
            lower: 1.0 - 0.75 * epsilon,
            upper: 1.0 - 0.25 * epsilon,
            plateau: 1.0 - 0.5 * epsilon,
        })
    }

    fn width(&self) -> f64 {
        0.5 * self.epsilon
    }

    pub fn value(&self, t: f64) -> f64 {
        if t <= self.lower {
            t
        } else if t >= self.upper {
            self.plateau
        } else {
            let w = self.width();
            let x = (t - self.lower) / w;
            let x3 = x * x * x;
            (self.lower + w * (x - x3 + 0.5 * x3 * x)).min(self.plateau)
        }
    }

    /// `(ζ′(t), ζ″(t))`.
    pub fn derivatives(&self, t: f64) -> (f64, f64) {
        if t <= self.lower {
            (1.0, 0.0)
        } else if t >= self.upper {
            (0.0, 0.0)
        } else {
            let w = self.width();
            let x = (t - self.lower) / w;
            (1.0 - 3.0 * x * x + 2.0 * x * x * x, -6.0 * x * (1.0 - x) / w)
        }
    }

    pub fn in_transition(&self, t: f64) -> bool {
        t > self.lower && t < self.upper
    }
}

/// Harmonic factor, cutoff and the radii of the flattening.
#[derive(Debug, Clone, Serialize)]
pub struct LohkampState {
    pub factor: HarmonicFactor,
    pub s1: f64,
    /// Beyond this radius `u ≥ 1 − ε/4`, so `v` is exactly constant.
    pub r_flat: f64,
    pub sup_at_s1: f64,
    pub cutoff: ConcaveCutoff,
    /// Radius of the excised ball of the chart.
    pub inner_radius: f64,
}

impl LohkampState {
    pub fn dim(&self) -> usize {
        self.factor.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.cutoff.epsilon
    }

    /// `s₂`: the flattening is complete on `{r ≥ s₂}`.
    pub fn s2(&self) -> f64 {
        self.r_flat
    }

    /// `v = ζ∘u` outside `s₁`, `u` inside.
    pub fn v(&self, x: &[f64]) -> f64 {
        let u = self.factor.eval(x);
        if radius(x) <= self.s1 {
            u
        } else {
            self.cutoff.value(u)
        }
    }

    /// `(Δv, Δu)` by the chain rule `Δv = ζ″|∇u|² + ζ′Δu` with
    /// finite-difference `∇u` and `Δu`.
    pub fn laplacians(&self, x: &[f64]) -> (f64, f64) {
        let u = self.factor.eval(x);
        let (d1, d2) = if radius(x) <= self.s1 {
            (1.0, 0.0)
        } else {
            self.cutoff.derivatives(u)
        };
        let f = |y: &[f64]| self.factor.eval(y);
        let (grad, lap_u) = gradient_and_laplacian(&f, x, FD_STEP);
        if d1 == 0.0 && d2 == 0.0 {
            return (0.0, lap_u);
        }
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        (d2 * g2 + d1 * lap_u, lap_u)
    }

    /// `R(g̃) = −4(n−1)/(n−2) v^{−(n+2)/(n−2)} Δv` on the flat background.
    pub fn scalar_curvature(&self, x: &[f64]) -> Result<f64> {
        let (lap_v, _) = self.laplacians(x);
        scalar_curvature_conformal(self.dim(), 0.0, self.v(x), lap_v)
    }

    /// `g̃ = v^{4/(n−2)} δ`.
    pub fn metric(&self) -> MetricSpec {
        let state = Arc::new(self.clone());
        MetricSpec::conformally_flat(self.dim(), ScalarFn::general(move |x| state.v(x)))
            .with_inner_radius(self.inner_radius)
    }

    /// Smallest radius whose difference stencils stay clear of the excised ball.
    pub fn sampling_floor(&self) -> f64 {
        self.inner_radius + 4.0 * FD_STEP
    }

    /// The constant `(1 − ε/2)^{4/(n−2)}` of the metric near infinity.
    pub fn flat_constant(&self) -> f64 {
        self.cutoff.plateau.powf(conformal_power(self.dim()))
    }
}

/// Builds the cutoff at `s₁`. Fails when `u` reaches 1 on the sphere `{r = s₁}`.
pub fn lohkamp_cutoff(factor: &HarmonicFactor, s1: f64, inner_radius: f64) -> Result<LohkampState> {
    if !(inner_radius > 0.0) {
        return Err(Error::config("inner radius must be positive"));
    }
    if !(s1 > inner_radius + 4.0 * FD_STEP) {
        return Err(Error::config(format!(
            "s1 = {s1} must exceed the inner radius {inner_radius} by the stencil reach"
        )));
    }
    let sup = factor.sup_on_sphere(s1);
    if !(sup < 1.0) {
        return Err(Error::Precondition {
            inequality: "sup_{r=s1} u < 1".into(),
            lhs: sup,
            rhs: 1.0,
            anchor: "take s₁ large enough such that u < 1 on {r = s₁}".into(),
        });
    }
    let cutoff = ConcaveCutoff::new(1.0 - sup)?;
    // inf over spheres increases with r when m < 0, so bisect on it
    let (mut lo, mut hi) = (s1, 2.0 * s1);
    while factor.inf_on_sphere(hi) < cutoff.upper {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::config("flat radius not found below 1e12"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if factor.inf_on_sphere(mid) >= cutoff.upper {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(LohkampState {
        factor: factor.clone(),
        s1,
        r_flat: hi,
        sup_at_s1: sup,
        cutoff,
        inner_radius,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuperharmonicOptions {
    pub radial_samples: usize,
    pub sphere_order: usize,
    /// Sampled region is `[s₁, outer_factor · r_flat]`.
    pub outer_factor: f64,
    pub harmonic_tolerance: f64,
    pub max_bound: f64,
    pub strict_bound: f64,
}

impl Default for SuperharmonicOptions {
    fn default() -> Self {
        Self {
            radial_samples: 400,
            sphere_order: 8,
            outer_factor: 2.0,
            harmonic_tolerance: 1e-9,
            max_bound: 1e-10,
            strict_bound: -1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuperharmonicAudit {
    pub samples: usize,
    pub max_laplacian: f64,
    pub max_at: Vec<f64>,
    /// Most negative `Δv` inside the transition band.
    pub band_min: f64,
    pub band_min_at: Vec<f64>,
    pub band_samples: usize,
    pub max_harmonic_defect: f64,
    pub passed: bool,
}

fn directions(dim: usize, order: usize, dipole: &[f64]) -> Vec<Vec<f64>> {
    let mut dirs: Vec<Vec<f64>> = SphereRule::new(dim, order).points().to_vec();
    for k in 0..dim {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; dim];
            e[k] = sign;
            dirs.push(e);
        }
    }
    let d = radius(dipole);
    if d > 0.0 {
        dirs.push(dipole.iter().map(|v| v / d).collect());
        dirs.push(dipole.iter().map(|v| -v / d).collect());
    }
    dirs
}

/// Samples `Δv` on `{r ≥ s₁}` and checks `Δv ≤ 0` with strict negativity in
/// the transition band.
pub fn check_superharmonic(state: &LohkampState, options: &SuperharmonicOptions) -> Result<SuperharmonicAudit> {
    let k = options.radial_samples.max(2);
    let outer = options.outer_factor.max(1.0) * state.r_flat;
    let step = (outer / state.s1).ln() / (k - 1) as f64;
    let dirs = directions(state.dim(), options.sphere_order, &state.factor.dipole);
    let points: Vec<Vec<f64>> = (0..k)
        .flat_map(|i| {
            let r = state.s1 * (step * i as f64).exp();
            dirs.iter().map(move |d| d.iter().map(|c| c * r).collect::<Vec<f64>>())
        })
        .collect();
    let values: Vec<(f64, f64, bool)> = points
        .par_iter()
        .map(|x| {
            let (lap_v, lap_u) = state.laplacians(x);
            let band = state.cutoff.in_transition(state.factor.eval(x));
            (lap_v, lap_u, band)
        })
        .collect();
    let mut audit = SuperharmonicAudit {
        samples: points.len(),
        max_laplacian: f64::NEG_INFINITY,
        max_at: vec![],
        band_min: f64::INFINITY,
        band_min_at: vec![],
        band_samples: 0,
        max_harmonic_defect: 0.0,
        passed: false,
    };
    let mut worst_harmonic = 0;
    for (i, (lap_v, lap_u, band)) in values.iter().enumerate() {
        if *lap_v > audit.max_laplacian {
            audit.max_laplacian = *lap_v;
            audit.max_at = points[i].clone();
        }
        if *band {
            audit.band_samples += 1;
            if *lap_v < audit.band_min {
                audit.band_min = *lap_v;
                audit.band_min_at = points[i].clone();
            }
        }
        if lap_u.abs() > audit.max_harmonic_defect {
            audit.max_harmonic_defect = lap_u.abs();
            worst_harmonic = i;
        }
    }
    if audit.max_harmonic_defect > options.harmonic_tolerance {
        return Err(Error::Precondition {
            inequality: format!(
                "|Δu| ≤ {:e} at {:?}",
                options.harmonic_tolerance, points[worst_harmonic]
            ),
            lhs: audit.max_harmonic_defect,
            rhs: options.harmonic_tolerance,
            anchor: "u is harmonic".into(),
        });
    }
    audit.passed = audit.max_laplacian <= options.max_bound && audit.band_min < options.strict_bound;
    Ok(audit)
}

/// The flattened metric with its curvature and constancy audits.
#[derive(Debug, Clone, Serialize)]
pub struct LohkampMetric {
    pub state: LohkampState,
    #[serde(skip)]
    pub metric: MetricSpec,
    pub min_scalar: f64,
    pub min_scalar_at: Vec<f64>,
    pub max_scalar: f64,
    pub max_scalar_at: Vec<f64>,
    pub flat_constant: f64,
    pub flat_samples: usize,
    pub samples: usize,
}

/// Builds `g̃ = v^{4/(n−2)}δ` and audits `R(g̃) ≥ −10⁻⁸`, `R(g̃) > 10⁻⁶`
/// somewhere, and exact constancy on `{r ≥ r_flat}`.
pub fn lohkamp_metric(state: &LohkampState, audit: &SuperharmonicAudit, options: &SuperharmonicOptions) -> Result<LohkampMetric> {
    if !audit.passed {
        return Err(Error::Precondition {
            inequality: "Δv ≤ 0 on {r ≥ s1}, Δv < 0 somewhere".into(),
            lhs: audit.max_laplacian,
            rhs: options.max_bound,
            anchor: "A direct computation shows".into(),
        });
    }
    let metric = state.metric();
    let n = state.dim();
    let dirs = directions(n, options.sphere_order, &state.factor.dipole);
    let k = options.radial_samples.max(2);

    // curvature from just outside the stencil reach to beyond the flat radius
    let lo = state.sampling_floor();
    let hi = options.outer_factor.max(1.0) * state.r_flat;
    let step = (hi / lo).ln() / (k - 1) as f64;
    let points: Vec<Vec<f64>> = (0..k)
        .flat_map(|i| {
            let r = lo * (step * i as f64).exp();
            dirs.iter().map(move |d| d.iter().map(|c| c * r).collect::<Vec<f64>>())
        })
        .collect();
    let scalars = points
        .par_iter()
        .map(|x| state.scalar_curvature(x))
        .collect::<Result<Vec<f64>>>()?;
    let (mut imin, mut imax) = (0, 0);
    for (i, r) in scalars.iter().enumerate() {
        if *r < scalars[imin] {
            imin = i;
        }
        if *r > scalars[imax] {
            imax = i;
        }
    }
    if scalars[imin] < CURVATURE_FLOOR {
        return Err(Error::Audit {
            check: "R(g̃) ≥ -1e-8".into(),
            location: format!("{:?}", points[imin]),
            value: scalars[imin],
            bound: CURVATURE_FLOOR,
        });
    }
    if !(scalars[imax] > POSITIVE_WITNESS) {
        return Err(Error::Audit {
            check: "R(g̃) > 1e-6 somewhere".into(),
            location: format!("{:?}", points[imax]),
            value: scalars[imax],
            bound: POSITIVE_WITNESS,
        });
    }

    let constant = state.flat_constant();
    let expected = DMatrix::identity(n, n) * constant;
    let flat_step = 2f64.ln() / (k - 1) as f64;
    let mut flat_samples = 0;
    for i in 0..k {
        let r = state.r_flat * (flat_step * i as f64).exp();
        for d in &dirs {
            let x: Vec<f64> = d.iter().map(|c| c * r).collect();
            let g = metric.components(&x);
            if g != expected {
                let dev = (g - &expected).amax();
                return Err(Error::Audit {
                    check: "g̃ = (1-ε/2)^{4/(n-2)} δ on {r ≥ r_flat}".into(),
                    location: format!("{x:?}"),
                    value: dev,
                    bound: 0.0,
                });
            }
            flat_samples += 1;
        }
    }
    Ok(LohkampMetric {
        state: state.clone(),
        metric,
        min_scalar: scalars[imin],
        min_scalar_at: points[imin].clone(),
        max_scalar: scalars[imax],
        max_scalar_at: points[imax].clone(),
        flat_constant: constant,
        flat_samples,
        samples: points.len(),
    })
}
