use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::profile::{radial_scalar_curvature, scalar_curvature_table, RadialTable};
use super::{bisect_tau, conformal_coupling, default_sobolev_constant, volume_nodes, CURVATURE_FLOOR};
use crate::adm::adm_mass;
use crate::cutoff::{eta, smoothstep};
use crate::elliptic::{
    eigenvalue_lower_bound, solve_conformal_factor, ConformalFactorSolution, DomainModel, EigenBoundary,
    EigenDomain, EllipticProblem, Potential, ToyEnd,
};
use crate::error::{Error, Result};
use crate::geometry::{default_step, ricci_tensor_fd, tensor_norm, MetricSpec, Perturbation, ScalarFn};

fn default_ppd() -> usize {
    1000
}

fn radial_only(metric: &MetricSpec) -> Result<()> {
    if metric.is_spherically_symmetric() {
        Ok(())
    } else {
        Err(Error::config("rigidity probes run on the radial tier and need a spherically symmetric metric"))
    }
}

fn mass_order(n: usize) -> usize {
    if n == 3 {
        16
    } else {
        8
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarProbeOptions {
    /// The bump cutoff is `η(r/s₀)`, supported on `[s₀, 4s₀]`.
    #[serde(default = "default_bump_scale")]
    pub bump_scale: f64,
    #[serde(default)]
    pub sobolev_constant: Option<f64>,
    #[serde(default = "default_ppd")]
    pub points_per_decade: usize,
    #[serde(default)]
    pub toy_end: Option<ToyEnd>,
    #[serde(default = "default_probe_table")]
    pub table_points: usize,
}

fn default_bump_scale() -> f64 {
    1.0
}
fn default_probe_table() -> usize {
    601
}

impl Default for ScalarProbeOptions {
    fn default() -> Self {
        Self {
            bump_scale: default_bump_scale(),
            sobolev_constant: None,
            points_per_decade: default_ppd(),
            toy_end: None,
            table_points: default_probe_table(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalarProbeReport {
    #[serde(rename = "A_integral")]
    pub a_integral: f64,
    #[serde(rename = "A_fit")]
    pub a_fit: f64,
    pub input_mass: f64,
    pub output_mass: f64,
    /// `adm_mass(ḡ) − adm_mass(g)`; the `(u+1)/2` factor makes this `A`.
    pub measured_shift: f64,
    pub shift_rel_err: f64,
    /// `min (u+1)/2`, at least `1/2`.
    pub min_factor: f64,
    pub max_eta_r: f64,
    /// `R(g)` vanished on the bump, so the potential is zero.
    pub trivial: bool,
    #[serde(skip)]
    pub solution: Option<Arc<ConformalFactorSolution>>,
}

/// Solves with `f = ((n−2)/(4(n−1))) η R(g)` and measures the mass of
/// `ḡ = ((u+1)/2)^{4/(n−2)} g`.
pub fn rigidity_probe_scalar(metric: &MetricSpec, options: &ScalarProbeOptions) -> Result<ScalarProbeReport> {
    radial_only(metric)?;
    let n = metric.dim();
    let s0 = options.bump_scale;
    if !(s0 >= 1.0) {
        return Err(Error::config("bump_scale must be at least 1"));
    }
    let c_s = match options.sobolev_constant {
        Some(c) => c,
        None => default_sobolev_constant(n)?,
    };
    let spacing = 3.0 * s0 / (options.table_points.max(4) - 1) as f64;
    let table = scalar_curvature_table(metric, s0, 4.0 * s0, spacing, true)?;
    let weighted: Vec<f64> = (0..table.values.len())
        .map(|k| eta(table.node(k) / s0) * table.values[k])
        .collect();
    let min_eta_r = weighted.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_eta_r = weighted.iter().cloned().fold(0.0, f64::max);
    if min_eta_r < -CURVATURE_FLOOR {
        return Err(Error::Precondition {
            inequality: "η R(g) >= 0".into(),
            lhs: min_eta_r,
            rhs: 0.0,
            anchor: "the choice of the conformal factor (u+1)/2".into(),
        });
    }
    let trivial = max_eta_r <= CURVATURE_FLOOR;
    let c = conformal_coupling(n);
    let potential = if trivial {
        Potential::zero()
    } else {
        let t = Arc::new(table);
        Potential::radial(move |r| c * eta(r / s0) * t.eval(r), s0, 4.0 * s0)
    };
    let mut domain = DomainModel::new(n, 128.0 * s0).with_points_per_decade(options.points_per_decade);
    domain.toy_end = options.toy_end;
    let problem = EllipticProblem::new(metric.clone(), domain, potential, c_s);
    let solution = Arc::new(solve_conformal_factor(&problem)?);
    let a = solution.a_integral;
    if !trivial && a >= 0.0 {
        return Err(Error::Regime(format!(
            "A = {a:.6e} >= 0 for a potential with ηR(g) >= 0 and > 0 somewhere"
        )));
    }
    let sol = solution.clone();
    let gbar = MetricSpec::composite(metric.clone(), ScalarFn::radial(move |r| 0.5 * (sol.u_at(r) + 1.0)));
    let radii: Vec<f64> = [8.0, 16.0, 32.0, 64.0].iter().map(|k| k * s0).collect();
    let before = adm_mass(metric, &radii, mass_order(n))?.extrapolated;
    let after = adm_mass(&gbar, &radii, mass_order(n))?.extrapolated;
    let measured_shift = after - before;
    let shift_rel_err = if a == 0.0 {
        measured_shift.abs()
    } else {
        (measured_shift - a).abs() / a.abs()
    };
    Ok(ScalarProbeReport {
        a_integral: a,
        a_fit: solution.a_fit,
        input_mass: before,
        output_mass: after,
        measured_shift,
        shift_rel_err,
        min_factor: 0.5 * (solution.min_u + 1.0),
        max_eta_r,
        trivial,
        solution: Some(solution),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigidityProbeSpec {
    /// `S = [s₀, 4s₀]` with `η(r/s₀)`; `η̃` is 1 on `S` and supported in
    /// `[s₀/2, 5s₀]`, where the solver domain starts.
    #[serde(default = "default_ricci_scale")]
    pub bump_scale: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_delta_ladder")]
    pub delta_ladder: Vec<f64>,
    #[serde(default)]
    pub sobolev_constant: Option<f64>,
    #[serde(default = "default_ppd")]
    pub points_per_decade: usize,
    #[serde(default = "default_ricci_table")]
    pub table_points: usize,
}

fn default_ricci_scale() -> f64 {
    1.0
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_delta_ladder() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4]
}
fn default_ricci_table() -> usize {
    451
}

impl Default for RigidityProbeSpec {
    fn default() -> Self {
        Self {
            bump_scale: default_ricci_scale(),
            epsilon: default_epsilon(),
            delta_ladder: default_delta_ladder(),
            sobolev_constant: None,
            points_per_decade: default_ppd(),
            table_points: default_ricci_table(),
        }
    }
}

impl RigidityProbeSpec {
    /// `η̃`: 1 on `[s₀, 4s₀]`, ramps on `[s₀/2, s₀]` and `[4s₀, 5s₀]`.
    pub fn eta_tilde(&self, r: f64) -> f64 {
        let s0 = self.bump_scale;
        if r < s0 {
            smoothstep((r - 0.5 * s0) / (0.5 * s0)).0
        } else if r <= 4.0 * s0 {
            1.0
        } else {
            smoothstep((5.0 * s0 - r) / s0).0
        }
    }
}

/// `Ric(g)` at `(r, 0, …)` in radial form `a δ + b x̂x̂`.
fn radial_ricci(metric: &MetricSpec, r: f64, h: f64) -> Result<(f64, f64)> {
    let mut x = vec![0.0; metric.dim()];
    x[0] = r;
    let ric = ricci_tensor_fd(metric, &x, h)?;
    Ok((ric[(1, 1)], ric[(0, 0)] - ric[(1, 1)]))
}

/// `ḡ = g − ε η(r/s₀) Ric(g)` with `Ric` by finite differences at a fixed step.
pub fn ricci_deformed_metric(metric: &MetricSpec, spec: &RigidityProbeSpec) -> Result<MetricSpec> {
    radial_only(metric)?;
    let s0 = spec.bump_scale;
    let eps = spec.epsilon;
    let h = default_step(s0);
    let (g1, g2) = (metric.clone(), metric.clone());
    Ok(MetricSpec::perturbed(
        metric.clone(),
        Perturbation::radial(
            move |r| {
                let w = eta(r / s0);
                if w == 0.0 {
                    0.0
                } else {
                    -eps * w * radial_ricci(&g1, r, h).map(|p| p.0).unwrap_or(f64::NAN)
                }
            },
            move |r| {
                let w = eta(r / s0);
                if w == 0.0 {
                    0.0
                } else {
                    -eps * w * radial_ricci(&g2, r, h).map(|p| p.1).unwrap_or(f64::NAN)
                }
            },
        ),
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaRung {
    pub delta: f64,
    #[serde(rename = "A_integral")]
    pub a_integral: f64,
    #[serde(rename = "A_fit")]
    pub a_fit: f64,
    pub min_u: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RicciProbeReport {
    pub epsilon: f64,
    pub bump: (f64, f64),
    pub max_ricci_norm: f64,
    /// `R(ḡ)` at the middle of the bump and its minimum over `S̃`.
    pub r_bar_at_bump: f64,
    pub min_r_bar: f64,
    /// Lowest Dirichlet value of `−Δ_ḡ + ((n−2)/(4(n−1)))R(ḡ)` on `S`.
    pub eigen_margin: f64,
    /// `(∫|R(ḡ)_−|^{n/2})^{2/n}` against `c_S/4`.
    pub smallness_lhs: f64,
    pub smallness_threshold: f64,
    pub tilde_floor: f64,
    pub rungs: Vec<DeltaRung>,
    pub final_delta: f64,
    #[serde(rename = "final_A")]
    pub final_a: f64,
    pub tau: f64,
    pub min_r_tilde: f64,
    pub input_mass: f64,
    /// `m + 2A/(1+τ)`.
    pub output_mass: f64,
}

/// `R(ḡ) − R(g)` on `[lo, hi]` by finite differences at the default step.
///
/// For scalar-flat inputs this is `R(ḡ)` with the truncation error of the
/// unperturbed part removed.
fn deformed_curvature_table(metric: &MetricSpec, gbar: &MetricSpec, lo: f64, hi: f64, points: usize) -> Result<RadialTable> {
    RadialTable::sample(lo, hi, points, |r| {
        Ok(radial_scalar_curvature(gbar, r, false)? - radial_scalar_curvature(metric, r, false)?)
    })
}

/// The Ricci-direction probe on a scalar-flat input.
pub fn rigidity_probe_ricci(metric: &MetricSpec, spec: &RigidityProbeSpec) -> Result<RicciProbeReport> {
    radial_only(metric)?;
    let n = metric.dim();
    let s0 = spec.bump_scale;
    if !(0.5 * s0 > metric.inner_radius()) || !(spec.epsilon > 0.0) {
        return Err(Error::config(
            "ricci probe needs bump_scale/2 above the chart's inner radius and epsilon > 0",
        ));
    }
    if spec.delta_ladder.is_empty() || spec.delta_ladder.windows(2).any(|w| !(w[1] < w[0])) || spec.delta_ladder.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::config("delta_ladder must be positive and strictly decreasing"));
    }
    let c_s = match spec.sobolev_constant {
        Some(c) => c,
        None => default_sobolev_constant(n)?,
    };
    let h = default_step(s0);
    let mut max_ricci_norm: f64 = 0.0;
    for k in 0..=60 {
        let r = s0 + 3.0 * s0 * k as f64 / 60.0;
        let mut x = vec![0.0; n];
        x[0] = r;
        let ric = ricci_tensor_fd(metric, &x, h)?;
        max_ricci_norm = max_ricci_norm.max(tensor_norm(&metric.components(&x), &ric));
    }
    if max_ricci_norm <= 1e-10 {
        return Err(Error::Precondition {
            inequality: "Ric(g) != 0 on supp η".into(),
            lhs: max_ricci_norm,
            rhs: 1e-10,
            anchor: "the metric ḡ = g − εηRic(g) satisfies".into(),
        });
    }

    let gbar = ricci_deformed_metric(metric, spec)?;
    let (lo, hi) = (0.5 * s0, 5.0 * s0);
    let table = Arc::new(deformed_curvature_table(metric, &gbar, lo, hi, spec.table_points)?);
    let r_bar_at_bump = table.eval(2.5 * s0);
    let min_r_bar = table.min();

    let t_eig = table.clone();
    let potential: crate::geometry::RadialEval = Arc::new(move |r| t_eig.eval(r));
    let eigen = eigenvalue_lower_bound(&EigenDomain::new(s0, 4.0 * s0, EigenBoundary::Dirichlet), &gbar, Some(&potential))?;
    if !(eigen.value > 0.0) {
        return Err(Error::Precondition {
            inequality: "lowest eigenvalue of −Δ + c_n R(ḡ) on S > 0".into(),
            lhs: eigen.value,
            rhs: 0.0,
            anchor: "for some positive constant c".into(),
        });
    }
    let nf = n as f64;
    let smallness_lhs = volume_nodes(&gbar, lo, hi, 200)?
        .iter()
        .map(|(r, w)| w * (-table.eval(*r)).max(0.0).powf(nf / 2.0))
        .sum::<f64>()
        .powf(2.0 / nf);
    let smallness_threshold = c_s / 4.0;
    if smallness_lhs > smallness_threshold {
        return Err(Error::Precondition {
            inequality: "(∫|R(ḡ)_-|^{n/2})^{2/n} <= c_S/4".into(),
            lhs: smallness_lhs,
            rhs: smallness_threshold,
            anchor: "the metric ḡ = g − εηRic(g) satisfies".into(),
        });
    }

    let c = conformal_coupling(n);
    let mut rungs = Vec::with_capacity(spec.delta_ladder.len());
    let mut last: Option<Arc<ConformalFactorSolution>> = None;
    for &delta in &spec.delta_ladder {
        let t = table.clone();
        let sp = spec.clone();
        let potential = Potential::radial(move |r| c * (t.eval(r) - delta * sp.eta_tilde(r)), lo, hi);
        let domain = DomainModel::new(n, 128.0 * s0)
            .with_inner_radius(lo)
            .with_points_per_decade(spec.points_per_decade);
        let problem = EllipticProblem::new(gbar.clone(), domain, potential, c_s);
        let sol = solve_conformal_factor(&problem)?;
        rungs.push(DeltaRung {
            delta,
            a_integral: sol.a_integral,
            a_fit: sol.a_fit,
            min_u: sol.min_u,
        });
        last = Some(Arc::new(sol));
    }
    let sol = last.expect("nonempty ladder");
    let final_rung = rungs.last().expect("nonempty ladder").clone();
    if final_rung.a_integral >= 0.0 {
        return Err(Error::Regime(format!(
            "A >= 0 across the delta ladder (final A = {:.6e}); eigenvalue margin {:.6e}",
            final_rung.a_integral, eigen.value
        )));
    }
    let delta = final_rung.delta;
    let p = 4.0 / (nf - 2.0);
    let samples: Vec<(f64, f64, f64)> = (0..table.values.len())
        .map(|k| {
            let r = table.node(k);
            (spec.eta_tilde(r), table.values[k], sol.u_at(r))
        })
        .collect();
    let min_tilde = |tau: f64| {
        samples
            .iter()
            .map(|(et, rb, u)| {
                (1.0 + tau).powf(p) * (u + tau).powf(-(nf + 2.0) / (nf - 2.0)) * (delta * et * u + tau * rb)
            })
            .fold(f64::INFINITY, f64::min)
    };
    let (tau, min_r_tilde) = bisect_tau(min_tilde)?;
    let input_mass = adm_mass(
        metric,
        &[8.0 * s0, 16.0 * s0, 32.0 * s0, 64.0 * s0],
        mass_order(n),
    )?
    .extrapolated;
    Ok(RicciProbeReport {
        epsilon: spec.epsilon,
        bump: (s0, 4.0 * s0),
        max_ricci_norm,
        r_bar_at_bump,
        min_r_bar,
        eigen_margin: eigen.value,
        smallness_lhs,
        smallness_threshold,
        tilde_floor: (0..=30)
            .map(|k| spec.eta_tilde(s0 + 3.0 * s0 * k as f64 / 30.0))
            .fold(f64::INFINITY, f64::min),
        final_delta: delta,
        final_a: final_rung.a_integral,
        rungs,
        tau,
        min_r_tilde,
        input_mass,
        output_mass: input_mass + 2.0 * final_rung.a_integral / (1.0 + tau),
    })
}
