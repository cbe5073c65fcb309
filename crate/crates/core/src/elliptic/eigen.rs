use serde::{Deserialize, Serialize};

use super::tridiag::SymTridiag;
use crate::error::{Error, Result};
use crate::geometry::{MetricSpec, RadialEval};
use crate::quadrature::gauss_legendre;

/// Radial P1 elements: `(α, β)` at `r` for the metric, no freezing.
pub(crate) fn alpha_beta(metric: &MetricSpec, r: f64) -> Result<(f64, f64)> {
    let c = metric
        .radial_components(r)
        .ok_or_else(|| Error::config("the radial tier requires a spherically symmetric metric"))?;
    Ok((c.g_rr().sqrt(), c.areal_radius(r)))
}

/// Stiffness `∫ β^{n−1}/α φ'_k φ'_l`, mass `∫ φ_k φ_l αβ^{n−1}` and, when a
/// potential is given, `∫ V φ_k φ_l αβ^{n−1}` on the nodes `r`.
pub(crate) struct P1 {
    pub stiffness: SymTridiag,
    pub mass: SymTridiag,
    pub potential: SymTridiag,
    pub potential_min: f64,
}

pub(crate) fn assemble_p1(metric: &MetricSpec, nodes: &[f64], potential: Option<&RadialEval>) -> Result<P1> {
    let n = nodes.len();
    let dim = metric.dim() as i32;
    let (gx, gw) = gauss_legendre(6);
    let mut stiffness = SymTridiag::zeros(n);
    let mut mass = SymTridiag::zeros(n);
    let mut pot = SymTridiag::zeros(n);
    let mut potential_min = f64::INFINITY;
    for e in 0..n - 1 {
        let (a, b) = (nodes[e], nodes[e + 1]);
        let h = b - a;
        let (mut kk, mut m00, mut m01, mut m11) = (0.0, 0.0, 0.0, 0.0);
        let (mut p00, mut p01, mut p11) = (0.0, 0.0, 0.0);
        for (x, w) in gx.iter().zip(&gw) {
            let s = 0.5 * (x + 1.0);
            let r = a + s * h;
            let wq = 0.5 * w * h;
            let (al, be) = alpha_beta(metric, r)?;
            let vol = al * be.powi(dim - 1);
            kk += wq * be.powi(dim - 1) / al / (h * h);
            let (f0, f1) = (1.0 - s, s);
            m00 += wq * vol * f0 * f0;
            m01 += wq * vol * f0 * f1;
            m11 += wq * vol * f1 * f1;
            if let Some(v) = potential {
                let val = v(r);
                potential_min = potential_min.min(val);
                p00 += wq * val * vol * f0 * f0;
                p01 += wq * val * vol * f0 * f1;
                p11 += wq * val * vol * f1 * f1;
            }
        }
        stiffness.diag[e] += kk;
        stiffness.diag[e + 1] += kk;
        stiffness.off[e] -= kk;
        mass.diag[e] += m00;
        mass.diag[e + 1] += m11;
        mass.off[e] += m01;
        pot.diag[e] += p00;
        pot.diag[e + 1] += p11;
        pot.off[e] += p01;
    }
    Ok(P1 {
        stiffness,
        mass,
        potential: pot,
        potential_min: if potential_min.is_finite() { potential_min } else { 0.0 },
    })
}

/// Drops the rows and columns listed in `fixed` (Dirichlet nodes).
pub(crate) fn restrict(m: &SymTridiag, keep_first: bool, keep_last: bool) -> SymTridiag {
    let n = m.len();
    let lo = if keep_first { 0 } else { 1 };
    let hi = if keep_last { n } else { n - 1 };
    SymTridiag {
        diag: m.diag[lo..hi].to_vec(),
        off: m.off[lo..hi - 1].to_vec(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenBoundary {
    /// Test functions vanish on the boundary of `S`.
    Dirichlet,
    /// Test functions are unrestricted on `S̄`.
    Neumann,
}

/// Radial region `S = {inner ≤ r ≤ outer}`; `inner = 0` is a ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenDomain {
    pub inner: f64,
    pub outer: f64,
    pub boundary: EigenBoundary,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

fn default_nodes() -> usize {
    800
}

impl EigenDomain {
    pub fn new(inner: f64, outer: f64, boundary: EigenBoundary) -> Self {
        Self {
            inner,
            outer,
            boundary,
            nodes: default_nodes(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenReport {
    /// Smallest value of `∫|∇ζ|² + c_n R ζ²` over `∫ζ² = 1`.
    pub value: f64,
    /// Bracket from Sturm counts of the pencil.
    pub bracket: (f64, f64),
    pub radii: Vec<f64>,
    pub minimizer: Vec<f64>,
    pub iterations: usize,
}

/// Lowest eigenvalue of `−Δ_g + ((n−2)/(4(n−1))) R` on `S` (P1 elements).
///
/// The value is bracketed by bisection on the inertia of `A − μB`, then the
/// minimizer is obtained by inverse power iteration shifted just below the
/// bracket.
pub fn eigenvalue_lower_bound(
    domain: &EigenDomain,
    metric: &MetricSpec,
    scalar_curvature: Option<&RadialEval>,
) -> Result<EigenReport> {
    if !(domain.inner >= 0.0 && domain.outer > domain.inner) || domain.nodes < 8 {
        return Err(Error::config("eigenvalue domain needs 0 <= inner < outer and >= 8 nodes"));
    }
    let nf = metric.dim() as f64;
    let c = (nf - 2.0) / (4.0 * (nf - 1.0));
    let radii: Vec<f64> = (0..=domain.nodes)
        .map(|k| domain.inner + (domain.outer - domain.inner) * k as f64 / domain.nodes as f64)
        .collect();
    let p1 = assemble_p1(metric, &radii, scalar_curvature)?;
    let a_full = SymTridiag {
        diag: p1
            .stiffness
            .diag
            .iter()
            .zip(&p1.potential.diag)
            .map(|(k, p)| k + c * p)
            .collect(),
        off: p1
            .stiffness
            .off
            .iter()
            .zip(&p1.potential.off)
            .map(|(k, p)| k + c * p)
            .collect(),
    };
    let dirichlet = domain.boundary == EigenBoundary::Dirichlet;
    let keep_first = !dirichlet || domain.inner == 0.0;
    let a = restrict(&a_full, keep_first, !dirichlet);
    let b = restrict(&p1.mass, keep_first, !dirichlet);
    let n = a.len();

    let count_below = |mu: f64| a.shifted(mu, &b).negative_count();
    let scale = (a.diag.iter().map(|x| x.abs()).fold(0.0, f64::max)
        / b.diag.iter().cloned().fold(f64::INFINITY, f64::min))
    .max(1.0);
    let mut lo = (c * p1.potential_min).min(0.0) - 1e-9 * scale;
    if count_below(lo) != Some(0) {
        return Err(Error::Estimation {
            iterations: 0,
            detail: format!("lower bound {lo:.6e} is not below the spectrum"),
        });
    }
    let x0: Vec<f64> = (0..n)
        .map(|i| (std::f64::consts::PI * (i as f64 + 1.0) / (n as f64 + 1.0)).sin())
        .collect();
    let rayleigh = |x: &[f64]| {
        let ax: f64 = a.apply(x).iter().zip(x).map(|(p, q)| p * q).sum();
        let bx: f64 = b.apply(x).iter().zip(x).map(|(p, q)| p * q).sum();
        ax / bx
    };
    let mut hi = rayleigh(&x0) + 1e-9 * scale;
    let mut iterations = 0;
    while hi - lo > 1e-13 * hi.abs().max(lo.abs()).max(1e-300) && iterations < 300 {
        let mid = 0.5 * (lo + hi);
        match count_below(mid) {
            Some(0) => lo = mid,
            Some(_) => hi = mid,
            None => hi = mid,
        }
        iterations += 1;
    }

    // inertia counts resolve μ only to rounding of the pencil entries
    let floor = 1e-14 * scale;
    let shift = lo - 1e-8 * (hi.abs() + 1.0);
    let op = a.shifted(shift, &b);
    let mut x = x0;
    let mut value = rayleigh(&x);
    let mut converged = false;
    for it in 0..100 {
        let rhs = b.apply(&x);
        let (y, _) = op.solve(&rhs, 1e-6)?;
        let norm = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
        x = y.iter().map(|v| v / norm).collect();
        let next = rayleigh(&x);
        iterations += 1;
        if (next - value).abs() <= 1e-12 * next.abs() + 1e-2 * floor && it > 0 {
            value = next;
            converged = true;
            break;
        }
        value = next;
    }
    if !converged {
        return Err(Error::Estimation {
            iterations,
            detail: format!("inverse iteration stalled at {value:.9e}"),
        });
    }
    if (value - hi).abs() > 1e-6 * hi.abs() + floor {
        return Err(Error::Estimation {
            iterations,
            detail: format!("inverse iteration value {value:.9e} outside Sturm bracket [{lo:.9e}, {hi:.9e}]"),
        });
    }
    if x.iter().sum::<f64>() < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    let mut minimizer = Vec::with_capacity(radii.len());
    if !keep_first {
        minimizer.push(0.0);
    }
    minimizer.extend_from_slice(&x);
    if dirichlet {
        minimizer.push(0.0);
    }
    Ok(EigenReport {
        value,
        bracket: (lo, hi),
        radii,
        minimizer,
        iterations,
    })
}
