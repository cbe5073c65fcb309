use serde::{Deserialize, Serialize};

use super::eigen::{alpha_beta, assemble_p1, restrict};
use crate::error::{Error, Result};
use crate::geometry::MetricSpec;
use crate::quadrature::{gauss_legendre, unit_sphere_area};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SobolevDomain {
    /// Ball `{r < radius}` (the metric must be defined down to the origin).
    Ball { radius: f64 },
    /// Annulus `{inner < r < outer}`.
    Annulus { inner: f64, outer: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevOptions {
    pub nodes: usize,
    /// Mesh `r = c sinh(t)` on balls; `c` fixes the resolution at the centre.
    pub core_scale: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for SobolevOptions {
    fn default() -> Self {
        Self {
            nodes: 1200,
            core_scale: 0.05,
            max_iterations: 5000,
            tolerance: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SobolevReport {
    /// Smallest Rayleigh quotient found; an upper bound for `c_S`.
    pub estimate: f64,
    pub is_upper_bound: bool,
    pub domain: String,
    pub radii: Vec<f64>,
    pub profile: Vec<f64>,
    pub iterations: usize,
}

/// Estimates `c_S` in `c_S (∫|ζ|^{2n/(n−2)})^{(n−2)/n} ≤ ∫|∇ζ|²` over radial
/// P1 functions vanishing on the outer boundary.
///
/// The minimizer is sought by the normalized nonlinear inverse iteration
/// `ζ ← K^{−1}(|ζ|^{p−2}ζ)`; every iterate is an admissible test function, so
/// the reported minimum is an upper bound for the constant.
pub fn sobolev_estimate(domain: &SobolevDomain, metric: &MetricSpec, options: &SobolevOptions) -> Result<SobolevReport> {
    let n = metric.dim();
    let nf = n as f64;
    let p = 2.0 * nf / (nf - 2.0);
    let m = options.nodes;
    if m < 16 {
        return Err(Error::config("sobolev estimate needs at least 16 nodes"));
    }
    let (radii, label, is_ball) = match *domain {
        SobolevDomain::Ball { radius } => {
            if !(radius > 0.0) {
                return Err(Error::config("ball radius must be positive"));
            }
            let c = options.core_scale.min(radius);
            let top = (radius / c).asinh();
            let r: Vec<f64> = (0..=m).map(|k| c * (top * k as f64 / m as f64).sinh()).collect();
            (r, format!("ball(radius={radius})"), true)
        }
        SobolevDomain::Annulus { inner, outer } => {
            if !(inner > 0.0 && outer > inner) {
                return Err(Error::config("annulus needs 0 < inner < outer"));
            }
            let step = (outer / inner).ln() / m as f64;
            let r: Vec<f64> = (0..=m).map(|k| inner * (step * k as f64).exp()).collect();
            (r, format!("annulus(inner={inner}, outer={outer})"), false)
        }
    };
    let p1 = assemble_p1(metric, &radii, None)?;
    let k = restrict(&p1.stiffness, is_ball, false);
    let first = if is_ball { 0 } else { 1 };
    let interior = k.len();
    let (gx, gw) = gauss_legendre(6);

    // quadrature data per element: (node_lo, node_hi, [(s, weight·volume)])
    let mut elements = Vec::with_capacity(radii.len() - 1);
    for e in 0..radii.len() - 1 {
        let (a, b) = (radii[e], radii[e + 1]);
        let mut q = Vec::with_capacity(gx.len());
        for (x, w) in gx.iter().zip(&gw) {
            let s = 0.5 * (x + 1.0);
            let (al, be) = alpha_beta(metric, a + s * (b - a))?;
            q.push((s, 0.5 * w * (b - a) * al * be.powi(n as i32 - 1)));
        }
        elements.push(q);
    }
    let nodal = |z: &[f64], idx: usize| -> f64 {
        if idx < first || idx >= first + interior {
            0.0
        } else {
            z[idx - first]
        }
    };
    let lp_integral = |z: &[f64]| -> f64 {
        let mut acc = 0.0;
        for (e, q) in elements.iter().enumerate() {
            let (z0, z1) = (nodal(z, e), nodal(z, e + 1));
            for (s, w) in q {
                acc += w * ((1.0 - s) * z0 + s * z1).abs().powf(p);
            }
        }
        acc
    };
    let nonlinear_load = |z: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; interior];
        for (e, q) in elements.iter().enumerate() {
            let (z0, z1) = (nodal(z, e), nodal(z, e + 1));
            let (mut b0, mut b1) = (0.0, 0.0);
            for (s, w) in q {
                let val = (1.0 - s) * z0 + s * z1;
                let g = val.abs().powf(p - 2.0) * val;
                b0 += w * g * (1.0 - s);
                b1 += w * g * s;
            }
            if e >= first && e < first + interior {
                out[e - first] += b0;
            }
            if e + 1 >= first && e + 1 < first + interior {
                out[e + 1 - first] += b1;
            }
        }
        out
    };
    let sphere = unit_sphere_area(n);
    let quotient = |z: &[f64]| -> f64 {
        let energy: f64 = k.apply(z).iter().zip(z).map(|(a, b)| a * b).sum();
        sphere.powf(2.0 / nf) * energy / lp_integral(z).powf(2.0 / p)
    };

    // start from a bubble at a quarter of the domain scale
    let centre = if is_ball { 0.0 } else { radii[0] };
    let width = 0.25 * (radii[radii.len() - 1] - centre);
    let mut z: Vec<f64> = (0..interior)
        .map(|i| {
            let r = radii[i + first] - centre;
            let cut = 1.0 - (r / (radii[radii.len() - 1] - centre)).powi(2);
            (1.0 + (r / width).powi(2)).powf(-(nf - 2.0) / 2.0) * cut.max(0.0)
        })
        .collect();
    let mut best = quotient(&z);
    let mut best_z = z.clone();
    let mut value = best;
    for it in 0..options.max_iterations {
        let load = nonlinear_load(&z);
        let (y, _) = k.solve(&load, 1e-8)?;
        let norm = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if !(norm > 0.0) {
            return Err(Error::Estimation {
                iterations: it,
                detail: "iterate collapsed to zero".into(),
            });
        }
        z = y.iter().map(|v| v / norm).collect();
        let next = quotient(&z);
        if next < best {
            best = next;
            best_z = z.clone();
        }
        if (next - value).abs() <= options.tolerance * next {
            let mut profile = vec![0.0; radii.len()];
            for (i, v) in best_z.iter().enumerate() {
                profile[i + first] = *v;
            }
            return Ok(SobolevReport {
                estimate: best,
                is_upper_bound: true,
                domain: label,
                radii,
                profile,
                iterations: it + 1,
            });
        }
        value = next;
    }
    Err(Error::Estimation {
        iterations: options.max_iterations,
        detail: format!("quotient still moving; last value {value:.9e}, best {best:.9e}"),
    })
}
