//! ADM surface integrals, extrapolated mass and the ALE normalization.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{default_step, metric_gradient, MetricSpec, Perturbation};
use crate::quadrature::{unit_sphere_area, SphereRule};

/// Lowest admissible quadrature order (nodes per longitude period).
pub const MIN_QUADRATURE_ORDER: usize = 8;

fn check_sphere(metric: &MetricSpec, rho: f64, order: usize) -> Result<f64> {
    if order < MIN_QUADRATURE_ORDER {
        return Err(Error::config(format!(
            "quadrature order {order} is below the minimum {MIN_QUADRATURE_ORDER}"
        )));
    }
    let h = default_step(rho);
    let clearance = rho - 2.0 * h;
    if !(clearance > metric.inner_radius()) {
        let mut point = vec![0.0; metric.dim()];
        point[0] = rho;
        return Err(Error::Domain {
            point,
            clearance,
            inner: metric.inner_radius(),
        });
    }
    Ok(h)
}

/// Normalized flux `(1/(2(n−1)|S^{n−1}|)) ∮_{r=ρ} (g_ij,j − g_jj,i) dσ^i`.
///
/// Spherically symmetric metrics `B δ + C x̂x̂ᵀ` use the exact angular
/// integral `ρ^{n−1}(−B'(ρ) + C(ρ)/ρ)/2`; everything else goes through the
/// product sphere rule.
pub fn adm_surface_integral(metric: &MetricSpec, rho: f64, order: usize) -> Result<f64> {
    let h = check_sphere(metric, rho, order)?;
    if let Some(c) = metric.radial_components(rho) {
        let n = metric.dim() as f64;
        let plus = metric.radial_components(rho + h).map(|p| p.iso);
        let minus = metric.radial_components(rho - h).map(|p| p.iso);
        if let (Some(p), Some(m)) = (plus, minus) {
            let db = (p - m) / (2.0 * h);
            return Ok(0.5 * rho.powf(n - 1.0) * (-db + c.normal / rho));
        }
    }
    adm_surface_integral_quadrature(metric, rho, order)
}

/// The same flux evaluated by sphere quadrature regardless of symmetry.
pub fn adm_surface_integral_quadrature(metric: &MetricSpec, rho: f64, order: usize) -> Result<f64> {
    let h = check_sphere(metric, rho, order)?;
    let n = metric.dim();
    let rule = SphereRule::new(n, order);
    let terms: Vec<f64> = rule
        .points()
        .par_iter()
        .map(|p| {
            let x: Vec<f64> = p.iter().map(|c| c * rho).collect();
            let dg = metric_gradient(metric, &x, h);
            let mut acc = 0.0;
            for i in 0..n {
                let mut div = 0.0;
                let mut trace = 0.0;
                for j in 0..n {
                    div += dg[j][(i, j)];
                    trace += dg[i][(j, j)];
                }
                acc += (div - trace) * p[i];
            }
            acc
        })
        .collect();
    let integral: f64 = terms.iter().zip(rule.weights()).map(|(t, w)| t * w).sum();
    let nf = n as f64;
    Ok(integral * rho.powf(nf - 1.0) / (2.0 * (nf - 1.0) * unit_sphere_area(n)))
}

#[derive(Debug, Clone, Serialize)]
pub struct MassReport {
    pub dimension: usize,
    pub radii: Vec<f64>,
    pub partial_masses: Vec<f64>,
    pub extrapolated: f64,
    /// Order `p` in `m(ρ) ≈ m∞ + cρ^{−p}` observed on the last three radii.
    pub observed_order: Option<f64>,
    /// Orders eliminated by the Richardson table.
    pub elimination_orders: Vec<f64>,
    pub quadrature_order: usize,
    pub area_element: &'static str,
    pub exact_angular: bool,
    /// Set when the tail is not monotone or the order fit fell back.
    pub low_confidence: bool,
}

impl MassReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("mass report serializes")
    }

    /// Columns `rho, partial_mass, abs_err_vs_extrapolated`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rho,partial_mass,abs_err_vs_extrapolated\n");
        for (r, m) in self.radii.iter().zip(&self.partial_masses) {
            out.push_str(&format!(
                "{:.12e},{:.12e},{:.6e}\n",
                r,
                m,
                (m - self.extrapolated).abs()
            ));
        }
        out
    }

    /// Plausibility band for the extrapolated value: within one tail range of
    /// the last three partial masses.
    pub fn extrapolation_in_band(&self) -> bool {
        let tail = &self.partial_masses[self.partial_masses.len() - 3..];
        let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        let slack = 1e-12 * self.extrapolated.abs().max(1.0);
        self.extrapolated >= lo - range - slack && self.extrapolated <= hi + range + slack
    }
}

fn validate_ladder(radii: &[f64]) -> Result<f64> {
    if radii.len() < 3 {
        return Err(Error::config(format!(
            "radius ladder needs at least 3 entries, got {}",
            radii.len()
        )));
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) || !(radii[0] > 0.0) {
        return Err(Error::config("radius ladder must be positive and strictly increasing"));
    }
    let q = radii[1] / radii[0];
    if radii
        .windows(2)
        .any(|w| ((w[1] / w[0]) / q - 1.0).abs() > 1e-9)
    {
        return Err(Error::config("radius ladder must be geometrically spaced"));
    }
    Ok(q)
}

/// Observed order from the last three rungs; `None` when ill-conditioned.
fn observed_order(m: &[f64], q: f64) -> Option<f64> {
    let k = m.len();
    let d1 = m[k - 2] - m[k - 3];
    let d2 = m[k - 1] - m[k - 2];
    let scale = m.iter().map(|v| v.abs()).fold(1.0, f64::max);
    if d1.abs() < 1e-13 * scale || d2.abs() < 1e-13 * scale {
        return None;
    }
    let ratio = d2 / d1;
    if !(ratio > 0.0 && ratio < 1.0) {
        return None;
    }
    let p = -ratio.ln() / q.ln();
    (0.25..=8.0).contains(&p).then_some(p)
}

/// Richardson table on a geometric ladder eliminating `ρ^{−p}, ρ^{−p−1}, …`.
fn richardson(m: &[f64], q: f64, p: f64) -> (f64, Vec<f64>) {
    let mut table = m.to_vec();
    let mut orders = Vec::new();
    for k in 0..m.len() - 1 {
        let order = p + k as f64;
        let factor = q.powf(order) - 1.0;
        for i in (k + 1..m.len()).rev() {
            table[i] += (table[i] - table[i - 1]) / factor;
        }
        orders.push(order);
    }
    (table[m.len() - 1], orders)
}

/// Partial masses on a geometric ladder and their extrapolation to infinity.
///
/// The leading order is measured from the last three rungs; when it is close
/// to an integer the integer is used, which is exact for the built-in
/// families. An ill-conditioned measurement falls back to `p = n − 2`.
pub fn adm_mass(metric: &MetricSpec, radii: &[f64], order: usize) -> Result<MassReport> {
    let q = validate_ladder(radii)?;
    let partial_masses = radii
        .par_iter()
        .map(|&rho| adm_surface_integral(metric, rho, order))
        .collect::<Result<Vec<f64>>>()?;
    let n = metric.dim();
    let observed = observed_order(&partial_masses, q);
    let scale = partial_masses.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let flat = partial_masses
        .windows(2)
        .all(|w| (w[1] - w[0]).abs() <= 1e-13 * scale.max(1e-300));
    let (extrapolated, elimination_orders) = if scale == 0.0 || flat {
        (partial_masses[partial_masses.len() - 1], Vec::new())
    } else {
        let p = match observed {
            Some(p) if (p - p.round()).abs() < 0.25 && p.round() >= 1.0 => p.round(),
            Some(p) => p,
            None => n as f64 - 2.0,
        };
        richardson(&partial_masses, q, p)
    };
    let tail = &partial_masses[partial_masses.len() - 3..];
    let monotone = tail.windows(2).all(|w| w[1] >= w[0]) || tail.windows(2).all(|w| w[1] <= w[0]);
    let exact_angular = metric.is_spherically_symmetric();
    Ok(MassReport {
        dimension: n,
        radii: radii.to_vec(),
        partial_masses,
        extrapolated,
        observed_order: observed,
        elimination_orders,
        quadrature_order: order,
        area_element: "euclidean",
        exact_angular,
        low_confidence: !monotone || (observed.is_none() && !flat && scale > 0.0),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FluxReport {
    pub radii: Vec<f64>,
    /// Un-normalized `∮ (g̃_ij,j − g̃_jj,i) dσ^i`.
    pub flux: Vec<f64>,
    /// Log–log slope of `|flux|`; `None` when the flux vanishes.
    pub slope: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Flux of a remainder tensor `g̃` through the coordinate spheres of a ladder.
pub fn residual_flux(
    dim: usize,
    remainder: &Perturbation,
    inner_radius: f64,
    radii: &[f64],
    order: usize,
    tolerance: f64,
) -> Result<FluxReport> {
    let carrier = MetricSpec::perturbed(
        MetricSpec::euclidean(dim).with_inner_radius(inner_radius),
        remainder.clone(),
    );
    let nf = dim as f64;
    let norm = 2.0 * (nf - 1.0) * unit_sphere_area(dim);
    let flux = radii
        .par_iter()
        .map(|&rho| adm_surface_integral(&carrier, rho, order).map(|m| m * norm))
        .collect::<Result<Vec<f64>>>()?;
    let slope = if flux.iter().all(|f| f.abs() > 1e-14) && radii.len() >= 2 {
        let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
        let ys: Vec<f64> = flux.iter().map(|f| f.abs().ln()).collect();
        let k = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / k;
        let my = ys.iter().sum::<f64>() / k;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        Some(sxy / sxx)
    } else {
        None
    };
    let last = flux.last().copied().unwrap_or(0.0);
    let decreasing = slope.is_none_or(|s| s < 0.0);
    Ok(FluxReport {
        radii: radii.to_vec(),
        passed: last.abs() <= tolerance && decreasing,
        flux,
        slope,
        tolerance,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AleMass {
    pub group_order: usize,
    pub cover: MassReport,
    pub quotient_mass: f64,
}

/// Mass of the quotient end: the cover's ADM mass divided by `|Γ|`.
pub fn ale_mass(cover: &MetricSpec, group_order: usize, radii: &[f64], order: usize) -> Result<AleMass> {
    if group_order == 0 {
        return Err(Error::config("group order must be at least 1"));
    }
    let report = adm_mass(cover, radii, order)?;
    Ok(AleMass {
        group_order,
        quotient_mass: report.extrapolated / group_order as f64,
        cover: report,
    })
}
