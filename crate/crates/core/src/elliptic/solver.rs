use std::fmt;

use serde::{Deserialize, Serialize};

use super::domain::{DomainModel, RadialCoefficients, RadialMesh};
use super::tridiag::SymTridiag;
use crate::error::{Error, Result};
use crate::geometry::{MetricSpec, RadialEval};
use crate::quadrature::{gauss_legendre_on, unit_sphere_area};

/// Radial potential `f` with compact support `[lo, hi]` on the end.
#[derive(Clone)]
pub struct Potential {
    pub eval: RadialEval,
    pub support: (f64, f64),
}

impl Potential {
    pub fn zero() -> Self {
        Self {
            eval: std::sync::Arc::new(|_| 0.0),
            support: (f64::NAN, f64::NAN),
        }
    }

    pub fn radial(f: impl Fn(f64) -> f64 + Send + Sync + 'static, lo: f64, hi: f64) -> Self {
        Self {
            eval: std::sync::Arc::new(f),
            support: (lo, hi),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.support.0.is_nan()
    }

    pub fn value(&self, r: f64) -> f64 {
        if self.is_zero() || r < self.support.0 || r > self.support.1 {
            0.0
        } else {
            (self.eval)(r)
        }
    }
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Potential(support = {:?})", self.support)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterCondition {
    /// `v = 0` on `∂B_R`.
    Dirichlet,
    /// Radiation condition `β^{n−1}/α ∂_r v = −v/T(R)`, which reduces to
    /// `∂_r v + (n−2)v/r = 0` on a flat background.
    Robin,
}

/// `Δ_g u − f u = 0` on the model, Neumann on the toy-end cut.
#[derive(Debug, Clone)]
pub struct EllipticProblem {
    pub metric: MetricSpec,
    pub domain: DomainModel,
    pub potential: Potential,
    pub sobolev_constant: f64,
    pub outer: OuterCondition,
    pub solver_tol: f64,
}

impl EllipticProblem {
    pub fn new(metric: MetricSpec, domain: DomainModel, potential: Potential, sobolev_constant: f64) -> Self {
        Self {
            metric,
            domain,
            potential,
            sobolev_constant,
            outer: OuterCondition::Robin,
            solver_tol: 1e-10,
        }
    }

    pub fn with_outer(mut self, outer: OuterCondition) -> Self {
        self.outer = outer;
        self
    }

    fn validate(&self) -> Result<RadialCoefficients> {
        self.domain.validate()?;
        if self.metric.dim() != self.domain.dim {
            return Err(Error::config("metric and domain dimensions differ"));
        }
        if !self.potential.is_zero() {
            let (lo, hi) = self.potential.support;
            if !(lo >= self.domain.inner_radius && hi > lo && hi * 10.0 <= self.domain.outer_radius) {
                return Err(Error::config(format!(
                    "support [{lo}, {hi}] of f must lie in U with outer_radius >= 10 x support"
                )));
            }
        }
        if !(self.sobolev_constant > 0.0) {
            return Err(Error::config("sobolev_constant must be positive"));
        }
        RadialCoefficients::new(&self.metric, self.domain.inner_radius)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SmallnessReport {
    /// `(∫_U |f_−|^{n/2} dμ)^{2/n}`.
    pub lhs: f64,
    /// `c_S / 2`.
    pub threshold: f64,
    pub ratio: f64,
    pub passed: bool,
}

/// Composite Gauss–Legendre integral of `f · αβ^{n−1}` over the support,
/// multiplied by `|S^{n−1}|`.
fn support_integral(coeffs: &RadialCoefficients, potential: &Potential, g: impl Fn(f64) -> f64) -> f64 {
    if potential.is_zero() {
        return 0.0;
    }
    let (lo, hi) = potential.support;
    let pieces = 400;
    let width = (hi - lo) / pieces as f64;
    let mut acc = 0.0;
    for p in 0..pieces {
        let a = lo + p as f64 * width;
        let (x, w) = gauss_legendre_on(6, a, a + width);
        for (r, w) in x.iter().zip(&w) {
            let (al, be) = coeffs.at_radius(*r);
            acc += w * g(potential.value(*r)) * al * be.powi(coeffs.dim as i32 - 1);
        }
    }
    acc * unit_sphere_area(coeffs.dim)
}

/// Smallness of the negative part: `(∫_U |f_−|^{n/2})^{2/n} ≤ c_S/2`.
pub fn check_smallness(metric: &MetricSpec, potential: &Potential, sobolev_constant: f64) -> Result<SmallnessReport> {
    let coeffs = RadialCoefficients::new(metric, metric.inner_radius())?;
    let n = metric.dim() as f64;
    let integral = support_integral(&coeffs, potential, |f| (-f).max(0.0).powf(n / 2.0));
    let lhs = integral.powf(2.0 / n);
    let threshold = sobolev_constant / 2.0;
    Ok(SmallnessReport {
        lhs,
        threshold,
        ratio: lhs / threshold,
        passed: lhs <= threshold,
    })
}

fn require_smallness(problem: &EllipticProblem) -> Result<SmallnessReport> {
    let s = check_smallness(&problem.metric, &problem.potential, problem.sobolev_constant)?;
    if !s.passed {
        return Err(Error::Precondition {
            inequality: "(∫_U |f_-|^{n/2})^{2/n} <= c_S/2".into(),
            lhs: s.lhs,
            rhs: s.threshold,
            anchor: "has a positive solution u".into(),
        });
    }
    Ok(s)
}

/// Discrete operator for `−Δ_g + f` (times the sphere area) and the load `∫f`.
struct Assembly {
    matrix: SymTridiag,
    load: Vec<f64>,
    conductance: Vec<f64>,
    volume: Vec<f64>,
    outer_tail: f64,
}

fn assemble(coeffs: &RadialCoefficients, mesh: &RadialMesh, potential: &Potential, outer: OuterCondition) -> Assembly {
    let n = mesh.len();
    let dim = coeffs.dim as i32;
    let mut matrix = SymTridiag::zeros(n);
    let mut conductance = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        let (a, b) = (mesh.t[k], mesh.t[k + 1]);
        // exact for the homogeneous radial equation
        let resistance = RadialCoefficients::integrate(a, b, |t| {
            let (al, be) = coeffs.at(t);
            al / be.powi(dim - 1)
        });
        let kappa = 1.0 / resistance;
        conductance.push(kappa);
        matrix.diag[k] += kappa;
        matrix.diag[k + 1] += kappa;
        matrix.off[k] = -kappa;
    }
    let r_in = mesh.inner_radius;
    let mut load = vec![0.0; n];
    let mut volume = vec![0.0; n];
    for k in 0..n {
        let (lo, hi) = mesh.cell(k);
        volume[k] = RadialCoefficients::integrate(lo, hi, |t| coeffs.volume_density(t));
        if !potential.is_zero() && hi >= 0.0 {
            let (slo, shi) = potential.support;
            let a = lo.max(slo - r_in).max(0.0);
            let b = hi.min(shi - r_in);
            if b > a {
                load[k] = RadialCoefficients::integrate(a, b, |t| {
                    potential.value(r_in + t) * coeffs.volume_density(t)
                });
            }
        }
        matrix.diag[k] += load[k];
    }
    let outer_tail = coeffs.tail(mesh.outer_radius);
    if outer == OuterCondition::Robin {
        matrix.diag[n - 1] += 1.0 / outer_tail;
    }
    Assembly {
        matrix,
        load,
        conductance,
        volume,
        outer_tail,
    }
}

/// Solution `v_{i,R}` of the truncated problem.
#[derive(Debug, Clone, Serialize)]
pub struct TruncatedSolution {
    pub level: usize,
    pub mesh: RadialMesh,
    pub v: Vec<f64>,
    /// `∫|∇v|² dμ`.
    pub energy: f64,
    pub residual: f64,
    /// Outward flux `β^{n−1}/α ∂_t v` through `∂B_R` (per unit sphere area).
    pub outer_flux: f64,
    pub outer_tail: f64,
    pub outer: OuterCondition,
    #[serde(skip)]
    load: Vec<f64>,
    #[serde(skip)]
    volume: Vec<f64>,
    #[serde(skip)]
    conductance: Vec<f64>,
}

fn solve_level(
    problem: &EllipticProblem,
    coeffs: &RadialCoefficients,
    level: usize,
    doubling: usize,
    outer: OuterCondition,
) -> Result<TruncatedSolution> {
    let mesh = RadialMesh::build(&problem.domain, level, doubling);
    let asm = assemble(coeffs, &mesh, &problem.potential, outer);
    let n = mesh.len();
    let rhs: Vec<f64> = asm.load.iter().map(|f| -f).collect();
    let (v, residual) = match outer {
        OuterCondition::Robin => asm.matrix.solve(&rhs, problem.solver_tol)?,
        OuterCondition::Dirichlet => {
            let mut inner = asm.matrix.clone();
            inner.diag.truncate(n - 1);
            inner.off.truncate(n - 2);
            let (mut v, res) = inner.solve(&rhs[..n - 1], problem.solver_tol)?;
            v.push(0.0);
            (v, res)
        }
    };
    let sphere = unit_sphere_area(coeffs.dim);
    let energy = sphere
        * asm
            .conductance
            .iter()
            .enumerate()
            .map(|(k, c)| c * (v[k + 1] - v[k]).powi(2))
            .sum::<f64>();
    let outer_flux = match outer {
        OuterCondition::Robin => -v[n - 1] / asm.outer_tail,
        // balance of the last half cell
        OuterCondition::Dirichlet => asm.conductance[n - 2] * (v[n - 1] - v[n - 2]),
    };
    Ok(TruncatedSolution {
        level,
        mesh,
        v,
        energy,
        residual,
        outer_flux,
        outer_tail: asm.outer_tail,
        outer,
        load: asm.load,
        volume: asm.volume,
        conductance: asm.conductance,
    })
}

/// `v_{i,R}`: `Δ_g v − f v = f` on `U_{i,R}`, `v = 0` on `∂B_R`, Neumann on `∂U_i`.
pub fn solve_truncated(problem: &EllipticProblem, level: usize, radius: f64) -> Result<TruncatedSolution> {
    let coeffs = problem.validate()?;
    require_smallness(problem)?;
    let d = &problem.domain;
    let doublings = ((radius / d.truncation_radius(0)).log2() - 1e-9).ceil().max(0.0) as usize;
    solve_level(problem, &coeffs, level, doublings, OuterCondition::Dirichlet)
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticRecord {
    pub iteration: usize,
    pub level: usize,
    pub outer_radius: f64,
    pub residual: f64,
    pub change: Option<f64>,
    pub min_u: f64,
    #[serde(rename = "A_integral")]
    pub a_integral: f64,
    #[serde(rename = "A_fit")]
    pub a_fit: f64,
}

/// Positive solution `u = 1 + v` with expansion data and flux diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct ConformalFactorSolution {
    pub dim: usize,
    pub outer: OuterCondition,
    /// Mesh coordinate: `r − r_in` on the end, `ξ ≤ 0` on the toy end.
    pub t: Vec<f64>,
    pub radii: Vec<Option<f64>>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    #[serde(rename = "A_integral")]
    pub a_integral: f64,
    #[serde(rename = "A_fit")]
    pub a_fit: f64,
    /// Second coefficient `B` of the fit `A r^{2−n} + B r^{1−n}`.
    pub fit_b: f64,
    /// `max r^{n−1} |v − A r^{2−n}|` over the fit window.
    pub remainder_proxy: f64,
    /// `∫_{∂U} ∂u/∂n dσ` and `∫_{∂U} u ∂u/∂n dσ`.
    pub flux_du: f64,
    pub flux_udu: f64,
    pub min_u: f64,
    pub energy: f64,
    pub outer_flux: f64,
    pub outer_tail: f64,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub smallness: SmallnessReport,
    /// `‖v‖_{2n/(n−2)}` over `U` and the bound `2 c_S^{−1} ‖f‖_{2n/(n+2)}`.
    pub energy_bound: (f64, f64),
    pub exhaustion_change: f64,
    pub diagnostics: Vec<DiagnosticRecord>,
    #[serde(skip)]
    coeffs: RadialCoefficients,
}

impl ConformalFactorSolution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }

    pub fn diagnostics_jsonl(&self) -> String {
        self.diagnostics
            .iter()
            .map(|d| serde_json::to_string(d).expect("record serializes") + "\n")
            .collect()
    }

    /// `v` at radius `r` on the end: cubic Hermite interpolation in `log r`
    /// inside the mesh and the exact harmonic tail `v(R)T(r)/T(R)` beyond it.
    pub fn v_at(&self, r: f64) -> f64 {
        let n = self.v.len();
        if r >= self.outer_radius {
            return match self.outer {
                OuterCondition::Robin => self.v[n - 1] * self.coeffs.tail(r) / self.outer_tail,
                OuterCondition::Dirichlet => 0.0,
            };
        }
        let first = self.radii.iter().position(|x| x.is_some()).unwrap_or(0);
        let logr = |k: usize| self.radii[k].expect("end node").ln();
        let x = r.max(self.inner_radius).ln();
        let (mut lo, mut hi) = (first, n - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if logr(mid) <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let slope = |k: usize| {
            let a = k.max(first + 1) - 1;
            let b = (k + 1).min(n - 1);
            (self.v[b] - self.v[a]) / (logr(b) - logr(a))
        };
        let (x0, x1) = (logr(lo), logr(hi));
        let hx = x1 - x0;
        let s = (x - x0) / hx;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.v[lo]
            + (s3 - 2.0 * s2 + s) * slope(lo) * hx
            + (-2.0 * s3 + 3.0 * s2) * self.v[hi]
            + (s3 - s2) * slope(hi) * hx
    }

    pub fn u_at(&self, r: f64) -> f64 {
        1.0 + self.v_at(r)
    }
}

/// Max change of `u` over `U` between two nested meshes.
fn change_on_u(a: &TruncatedSolution, b: &TruncatedSolution) -> f64 {
    let (small, large) = if a.v.len() <= b.v.len() { (a, b) } else { (b, a) };
    let offset = large.mesh.boundary_of_u as isize - small.mesh.boundary_of_u as isize;
    let mut change: f64 = 0.0;
    for k in small.mesh.boundary_of_u..small.v.len() {
        let j = k as isize + offset;
        if j < 0 || j as usize >= large.v.len() {
            break;
        }
        change = change.max((small.v[k] - large.v[j as usize]).abs());
    }
    change
}

fn least_squares(rows: &[(f64, f64)], dim: usize, with_constant: bool) -> (f64, f64) {
    let m = rows.len();
    if m < 3 {
        return (0.0, 0.0);
    }
    let cols = if with_constant { 3 } else { 2 };
    let nf = dim as f64;
    let r_ref = rows[0].0;
    // scale the basis columns to order one at the window start
    let mut a = nalgebra::DMatrix::zeros(m, cols);
    let mut b = nalgebra::DVector::zeros(m);
    for (i, (r, v)) in rows.iter().enumerate() {
        let x = r / r_ref;
        a[(i, 0)] = x.powf(2.0 - nf);
        a[(i, 1)] = x.powf(1.0 - nf);
        if with_constant {
            a[(i, 2)] = 1.0;
        }
        b[i] = *v;
    }
    let svd = a.svd(true, true);
    let c = svd.solve(&b, 1e-14).expect("SVD solve with computed U and V");
    (c[0] * r_ref.powf(nf - 2.0), c[1] * r_ref.powf(nf - 1.0))
}

/// Exhaustion solve of `Δ_g u − f u = 0` with `u → 1` at infinity.
///
/// For each exhaustion level `i` the truncation radius is doubled until `u`
/// is stable on `U`, then `i` is increased until `u` is stable across levels.
pub fn solve_conformal_factor(problem: &EllipticProblem) -> Result<ConformalFactorSolution> {
    let coeffs = problem.validate()?;
    let smallness = require_smallness(problem)?;
    let domain = &problem.domain;
    let tol = domain.exhaustion_tol;
    let dim = domain.dim;
    let nf = dim as f64;
    let sphere = unit_sphere_area(dim);
    let a_integral_of = |s: &TruncatedSolution| -> f64 {
        -s.load
            .iter()
            .zip(&s.v)
            .map(|(f, v)| f * (1.0 + v))
            .sum::<f64>()
            / (nf - 2.0)
    };

    let mut diagnostics = Vec::new();
    let mut previous_level: Option<TruncatedSolution> = None;
    let mut last_change = f64::INFINITY;
    let mut iteration = 0;
    for level in 0..domain.levels() {
        let mut previous_radius: Option<TruncatedSolution> = None;
        let mut converged = None;
        for doubling in 0..=domain.radius_doublings {
            let sol = solve_level(problem, &coeffs, level, doubling, problem.outer)?;
            let change = previous_radius.as_ref().map(|p| change_on_u(p, &sol));
            diagnostics.push(DiagnosticRecord {
                iteration,
                level,
                outer_radius: sol.mesh.outer_radius,
                residual: sol.residual,
                change,
                min_u: sol.v.iter().map(|v| 1.0 + v).fold(f64::INFINITY, f64::min),
                a_integral: a_integral_of(&sol),
                a_fit: f64::NAN,
            });
            iteration += 1;
            if change.is_some_and(|c| c < tol) {
                converged = Some(sol);
                break;
            }
            previous_radius = Some(sol);
        }
        let sol = match converged {
            Some(s) => s,
            None => {
                let trend: Vec<f64> = diagnostics
                    .iter()
                    .filter(|d| d.level == level)
                    .filter_map(|d| d.change)
                    .collect();
                return Err(Error::NonConvergence {
                    detail: format!("truncation radius doubling did not stabilize u on U at level {level}"),
                    trend,
                });
            }
        };
        if let Some(prev) = &previous_level {
            last_change = change_on_u(prev, &sol);
            if last_change < tol {
                previous_level = Some(sol);
                break;
            }
        } else if domain.levels() == 1 {
            last_change = 0.0;
        }
        previous_level = Some(sol);
    }
    let sol = previous_level.expect("at least one level");
    if last_change >= tol && domain.levels() > 1 {
        return Err(Error::NonConvergence {
            detail: "exhaustion levels did not stabilize u on U".into(),
            trend: vec![last_change],
        });
    }

    let mesh = &sol.mesh;
    let n = mesh.len();
    let u: Vec<f64> = sol.v.iter().map(|v| 1.0 + v).collect();
    let min_u = u.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min_u > 0.0) {
        return Err(Error::Solver(format!(
            "regime violation: min u = {min_u:.6e} <= 0 under passed smallness"
        )));
    }
    let a_integral = a_integral_of(&sol);

    let r_out = mesh.outer_radius;
    let window: Vec<(f64, f64)> = (mesh.first_end..n)
        .filter_map(|k| {
            let r = mesh.radius(k)?;
            (r >= r_out / 10.0 && r <= 0.9 * r_out).then_some((r, sol.v[k]))
        })
        .collect();
    let (a_fit, fit_b) = least_squares(&window, dim, problem.outer == OuterCondition::Dirichlet);
    let remainder_proxy = window
        .iter()
        .map(|(r, v)| (v - a_fit * r.powf(2.0 - nf)).abs() * r.powf(nf - 1.0))
        .fold(0.0, f64::max);
    if let Some(last) = diagnostics.last_mut() {
        last.a_fit = a_fit;
    }

    let b = mesh.boundary_of_u;
    let face = |k: usize| sol.conductance[k] * (sol.v[k + 1] - sol.v[k]);
    let p_boundary = if b == 0 { 0.0 } else { 0.5 * (face(b - 1) + face(b)) };
    let flux_du = -sphere * p_boundary;
    let flux_udu = u[b] * flux_du;

    let p = 2.0 * nf / (nf - 2.0);
    let q = 2.0 * nf / (nf + 2.0);
    let v_norm = (sphere
        * (b..n)
            .map(|k| sol.v[k].abs().powf(p) * sol.volume[k])
            .sum::<f64>())
    .powf(1.0 / p);
    let f_norm = support_integral(&coeffs, &problem.potential, |f| f.abs().powf(q)).powf(1.0 / q);
    let energy_bound = (v_norm, 2.0 / problem.sobolev_constant * f_norm);

    let scale = a_integral.abs().max(1e-8);
    if (a_integral - a_fit).abs() / scale > 1e-2 {
        return Err(Error::ExpansionMismatch {
            integral: a_integral,
            fit: a_fit,
        });
    }

    Ok(ConformalFactorSolution {
        dim,
        outer: problem.outer,
        t: mesh.t.clone(),
        radii: (0..n).map(|k| mesh.radius(k)).collect(),
        u,
        v: sol.v.clone(),
        a_integral,
        a_fit,
        fit_b,
        remainder_proxy,
        flux_du,
        flux_udu,
        min_u,
        energy: sol.energy,
        outer_flux: sol.outer_flux,
        outer_tail: sol.outer_tail,
        inner_radius: mesh.inner_radius,
        outer_radius: r_out,
        smallness,
        energy_bound,
        exhaustion_change: last_change,
        diagnostics,
        coeffs,
    })
}
