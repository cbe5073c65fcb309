//! The six subcommands.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use masskit::adm::adm_mass;
use masskit::compactification::{
    ale_lift, check_superharmonic, fixed_point_of_finite_group, lohkamp_cutoff, lohkamp_metric,
    torus_glue, AffineIsometry, GroupAction, SuperharmonicOptions, TorusGlueSpec, CURVATURE_FLOOR,
    GROUP_TOLERANCE, POSITIVE_WITNESS,
};
use masskit::density::density_deform;
use masskit::elliptic::{check_smallness, solve_conformal_factor, DomainModel, EllipticProblem, Potential};
use masskit::geometry::{radius, scalar_curvature_bartnik};
use masskit::Error;
use nalgebra::{DMatrix, DVector};

use crate::config::{ConfigError, PotentialConfig, SceneConfig};
use crate::manifest::{AuditRecord, OutputDir, RunManifest};
use crate::metrics::{build_metric, exact_scalar, harmonic_factor};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
}

pub struct Context<'a> {
    pub cfg: &'a SceneConfig,
    pub seed: u64,
    pub manifest: &'a mut RunManifest,
    pub out: &'a mut OutputDir,
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

/// Uniform random direction in `ℝⁿ`.
fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = radius(&x);
        if r > 1e-3 && r <= 1.0 {
            return x.iter().map(|v| v / r).collect();
        }
    }
}

pub fn cmd_mass(ctx: Context) -> Result<(), RunError> {
    let cfg = ctx.cfg;
    let radii = cfg.require_radii()?.to_vec();
    let section = cfg.mass.clone().unwrap_or_default();
    let metric = build_metric(cfg)?;
    let report = adm_mass(&metric, &radii, cfg.quadrature_order())?;
    ctx.manifest.stage("adm_mass");
    ctx.out.write("mass_report.json", &(report.to_json() + "\n"))?;
    ctx.out.write("mass_report.csv", &report.to_csv())?;

    ctx.manifest.audit(AuditRecord::check(
        "extrapolation_in_band",
        "extrapolated mass within one tail range of the last three partial masses",
        report.extrapolation_in_band(),
    ));
    if let Some(expected) = section.expected {
        let err = (report.extrapolated - expected).abs();
        let bound = if expected == 0.0 {
            cfg.tolerances.mass_absolute
        } else {
            cfg.tolerances.mass_relative * expected.abs().max(1.0)
        };
        ctx.manifest.audit(
            AuditRecord::at_most("mass_matches_expected", "|m_extrapolated − m_expected| ≤ tol", err, bound)
                .at(format!("radii {radii:?}")),
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let (lo, hi) = (radii[0], radii[radii.len() - 1]);
    let mut bad: Option<String> = None;
    for _ in 0..section.audit_points {
        let r = rng.gen_range(lo..=hi);
        let x: Vec<f64> = random_direction(&mut rng, cfg.dimension).iter().map(|c| c * r).collect();
        if let Err(e) = metric.check_point(&x) {
            bad = Some(format!("{x:?}: {e}"));
            break;
        }
    }
    let mut rec = AuditRecord::check("positive_definite_sampled", "g(x) > 0 at seeded sample points", bad.is_none());
    if let Some(loc) = bad {
        rec = rec.at(loc);
    }
    ctx.manifest.audit(rec);
    ctx.manifest.stage("audits");
    Ok(())
}

fn build_potential(p: &PotentialConfig) -> Potential {
    match p.support() {
        None => Potential::zero(),
        Some((center, width)) => {
            let p = p.clone();
            Potential::radial(move |r| p.value(r), center - width, center + width)
        }
    }
}

pub fn cmd_solve(ctx: Context) -> Result<(), RunError> {
    let cfg = ctx.cfg;
    let s = SceneConfig::require(&cfg.solve, "solve")?;
    let metric = build_metric(cfg)?;
    let n = cfg.dimension;
    let c_s = match s.sobolev_constant {
        Some(c) => c,
        None => masskit::density::default_sobolev_constant(n)?,
    };
    let potential = build_potential(&s.potential);
    let mut domain = DomainModel::new(n, s.outer_radius)
        .with_inner_radius(cfg.inner_radius)
        .with_points_per_decade(s.points_per_decade);
    domain.toy_end = s.toy_end;

    let small = check_smallness(&metric, &potential, c_s)?;
    ctx.manifest.stage("smallness");
    ctx.manifest.audit(
        AuditRecord::at_most(
            "smallness",
            "(∫_U |f_-|^{n/2})^{2/n} ≤ c_S/2",
            small.lhs,
            small.threshold,
        )
        .anchored("has a positive solution u"),
    );
    if !small.passed {
        return Ok(());
    }

    let problem = EllipticProblem::new(metric, domain, potential, c_s).with_outer(s.outer_condition);
    let sol = solve_conformal_factor(&problem)?;
    ctx.manifest.stage("solve_conformal_factor");
    ctx.out.write("solution.json", &(sol.to_json() + "\n"))?;
    ctx.out.write("iterations.jsonl", &sol.diagnostics_jsonl())?;
    let mut csv = String::from("t,r,u,v\n");
    for k in 0..sol.t.len() {
        let r = sol.radii[k].map(|r| format!("{r:.12e}")).unwrap_or_default();
        csv.push_str(&format!("{:.12e},{r},{:.12e},{:.12e}\n", sol.t[k], sol.u[k], sol.v[k]));
    }
    ctx.out.write("profile.csv", &csv)?;

    ctx.manifest.audit(AuditRecord::above("min_u_positive", "min u > 0", sol.min_u, 0.0));
    ctx.manifest.audit(AuditRecord::at_most(
        "boundary_flux_du",
        "|∫_{∂U} ∂u/∂n| ≤ 1e-8",
        sol.flux_du.abs(),
        1e-8,
    ));
    ctx.manifest.audit(AuditRecord::at_most(
        "boundary_flux_udu",
        "|∫_{∂U} u ∂u/∂n| ≤ 1e-8",
        sol.flux_udu.abs(),
        1e-8,
    ));
    if let Some(reference) = s.reference {
        let err = (sol.a_integral - reference.a).abs();
        let bound = if reference.a == 0.0 {
            1e-12
        } else {
            cfg.tolerances.solve_relative * reference.a.abs()
        };
        ctx.manifest.audit(AuditRecord::at_most(
            "a_matches_reference",
            "|A − A_ref| ≤ tol·|A_ref|",
            err,
            bound,
        ));
    }
    Ok(())
}

pub fn cmd_deform(ctx: Context) -> Result<(), RunError> {
    let cfg = ctx.cfg;
    let options = SceneConfig::require(&cfg.deform, "deform")?;
    let metric = build_metric(cfg)?;
    let result = density_deform(&metric, options)?;
    ctx.manifest.stage("density_deform");
    ctx.out.write("deform.json", &(result.to_json() + "\n"))?;
    ctx.out.write("trend.csv", &result.trend_csv())?;

    for rung in &result.rungs {
        let s = rung.s;
        ctx.manifest.audit(AuditRecord::at_least(
            &format!("s{s}_min_scalar"),
            "min R(ḡ) ≥ −1e-8",
            rung.min_r,
            -1e-8,
        ));
        ctx.manifest.audit(AuditRecord::at_least(
            &format!("s{s}_min_u"),
            "min (u_s+τ)/(1+τ) ≥ τ/(1+τ)",
            rung.min_u_tau,
            rung.min_u_bound,
        ));
        ctx.manifest.audit(AuditRecord::check(
            &format!("s{s}_closed_form"),
            "closed-form R(ḡ) agrees with finite differences within 10h²",
            rung.closed_form_passed(),
        ));
        if rung.mass_shift != 0.0 {
            ctx.manifest.audit(AuditRecord::at_most(
                &format!("s{s}_adm_shift"),
                "|Δm_ADM − 2A/(1+τ)| ≤ tol·|2A/(1+τ)|",
                rung.adm_shift_rel_err,
                cfg.tolerances.mass_shift_relative,
            ));
        }
    }
    let a: Vec<f64> = result.rungs.iter().map(|r| r.a_integral.abs()).collect();
    let decreasing = a.iter().all(|v| *v == 0.0) || a.windows(2).all(|w| w[1] < w[0]);
    ctx.manifest.audit(AuditRecord::check(
        "a_decreasing",
        "|A_s| strictly decreasing over the ladder (or identically zero)",
        decreasing,
    ));
    Ok(())
}

#[derive(Serialize)]
struct CompactifyReport<'a> {
    state: &'a masskit::compactification::LohkampState,
    superharmonic: &'a masskit::compactification::SuperharmonicAudit,
    metric: &'a masskit::compactification::LohkampMetric,
    torus: &'a masskit::compactification::TorusChart,
    random_samples: usize,
    random_min_scalar: f64,
}

pub fn cmd_compactify(ctx: Context) -> Result<(), RunError> {
    let cfg = ctx.cfg;
    let sec = SceneConfig::require(&cfg.compactify, "compactify")?;
    let factor = harmonic_factor(cfg)?.ok_or_else(|| ConfigError::Invalid {
        pointer: "/metric/family".into(),
        message: "compactify needs a schwarzschild or harmonic metric".into(),
    })?;
    let state = lohkamp_cutoff(&factor, sec.s1, cfg.inner_radius)?;
    ctx.manifest.stage("lohkamp_cutoff");

    let options = SuperharmonicOptions {
        radial_samples: sec.radial_samples,
        sphere_order: sec.sphere_order,
        ..SuperharmonicOptions::default()
    };
    let sh = check_superharmonic(&state, &options)?;
    ctx.manifest.stage("check_superharmonic");
    ctx.manifest.audit(
        AuditRecord::at_most("superharmonic_max", "max Δv ≤ 1e-10 on {r ≥ s1}", sh.max_laplacian, options.max_bound)
            .at(format!("{:?}", sh.max_at))
            .anchored("A direct computation shows"),
    );
    ctx.manifest.audit(
        AuditRecord::at_most(
            "superharmonic_strict",
            "min Δv < −1e-6 in the transition band",
            sh.band_min,
            options.strict_bound,
        )
        .at(format!("{:?}", sh.band_min_at)),
    );
    if !sh.passed {
        return Ok(());
    }

    let lm = lohkamp_metric(&state, &sh, &options)?;
    ctx.manifest.stage("lohkamp_metric");
    ctx.manifest.audit(
        AuditRecord::at_least("metric_scalar_floor", "min R(g̃) ≥ −1e-8", lm.min_scalar, CURVATURE_FLOOR)
            .at(format!("{:?}", lm.min_scalar_at)),
    );
    ctx.manifest.audit(
        AuditRecord::above("metric_scalar_positive", "max R(g̃) > 1e-6", lm.max_scalar, POSITIVE_WITNESS)
            .at(format!("{:?}", lm.max_scalar_at)),
    );
    ctx.manifest.audit(AuditRecord::check(
        "metric_flat_exact",
        "g̃ = (1−ε/2)^{4/(n−2)} δ exactly on {r ≥ r_flat}",
        lm.flat_samples > 0,
    ));

    let excision = state.sampling_floor();
    let side = sec.cube_factor * state.r_flat;
    let spec = TorusGlueSpec {
        side,
        collar: side / 8.0,
        sample_grid: sec.sample_grid,
        chart_grid: sec.chart_grid,
        excision_radius: excision,
    };
    let st = state.clone();
    let scalar = move |x: &[f64]| st.scalar_curvature(x);
    let torus = torus_glue(&lm.metric, &scalar, &spec)?;
    ctx.manifest.stage("torus_glue");
    ctx.manifest.audit(AuditRecord::at_most(
        "torus_periodicity",
        "face-to-face difference of g, ∂g, ∂²g = 0",
        torus.periodicity_defect,
        0.0,
    ));
    ctx.manifest.audit(
        AuditRecord::at_least("torus_scalar_floor", "min R ≥ −1e-8 on the fundamental domain", torus.min_scalar, CURVATURE_FLOOR)
            .at(format!("{:?}", torus.min_scalar_at)),
    );
    ctx.manifest.audit(
        AuditRecord::above("torus_scalar_positive", "max R > 1e-6 on the fundamental domain", torus.max_scalar, POSITIVE_WITNESS)
            .at(format!("{:?}", torus.max_scalar_at)),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let half = 0.5 * side;
    let mut worst = (f64::INFINITY, vec![]);
    let mut count = 0;
    while count < sec.random_samples {
        let x: Vec<f64> = (0..cfg.dimension).map(|_| rng.gen_range(-half..half)).collect();
        if radius(&x) < excision {
            continue;
        }
        let r = state.scalar_curvature(&x)?;
        if r < worst.0 {
            worst = (r, x);
        }
        count += 1;
    }
    if count > 0 {
        ctx.manifest.audit(
            AuditRecord::at_least("random_scalar_floor", "R ≥ −1e-8 at seeded points", worst.0, CURVATURE_FLOOR)
                .at(format!("{:?}", worst.1)),
        );
    }

    ctx.out.write(
        "lohkamp.json",
        &json(&CompactifyReport {
            state: &state,
            superharmonic: &sh,
            metric: &lm,
            torus: &torus,
            random_samples: count,
            random_min_scalar: worst.0,
        }),
    )?;
    ctx.out.write("torus_chart.txt", &torus.render())?;
    Ok(())
}

#[derive(Serialize)]
struct AleReport<'a> {
    lift: &'a masskit::compactification::AleLift,
    group_order: usize,
    incompressible_declared: bool,
    fixed_point: Option<Vec<f64>>,
}

pub fn cmd_ale(ctx: Context) -> Result<(), RunError> {
    let cfg = ctx.cfg;
    let sec = SceneConfig::require(&cfg.ale, "ale")?;
    let radii = cfg.require_radii()?.to_vec();
    let n = cfg.dimension;
    let metric = build_metric(cfg)?;
    let group = GroupAction::from_row_major(n, &sec.generators)?;
    ctx.manifest.stage("group_action");
    ctx.manifest.audit(AuditRecord::at_most(
        "group_closure",
        "closure defect ≤ 1e-12",
        group.closure_defect(),
        GROUP_TOLERANCE,
    ));
    let lift = ale_lift(&metric, &group, &radii, cfg.quadrature_order())?;
    ctx.manifest.stage("ale_lift");
    ctx.manifest.audit(AuditRecord::at_most(
        "gamma_invariance",
        "max |Tᵀ g(Tx) T − g(x)| ≤ 1e-12",
        lift.invariance_defect,
        GROUP_TOLERANCE,
    ));
    let k = group.order() as f64;
    ctx.manifest.audit(AuditRecord::at_most(
        "mass_ratio",
        "|m(cover)/m(quotient) − |Γ|| ≤ 1e-3·|Γ|",
        (lift.mass_ratio - k).abs(),
        1e-3 * k,
    ));
    if let Some(expected) = sec.expected_quotient_mass {
        let bound = if expected == 0.0 {
            cfg.tolerances.mass_absolute
        } else {
            cfg.tolerances.mass_relative * expected.abs().max(1.0)
        };
        ctx.manifest.audit(AuditRecord::at_most(
            "quotient_mass_matches_expected",
            "|m(quotient) − m_expected| ≤ tol",
            (lift.quotient_mass - expected).abs(),
            bound,
        ));
    }

    let mut fixed = None;
    if let Some(elements) = &sec.affine_group {
        let isometries: Vec<AffineIsometry> = elements
            .iter()
            .map(|e| AffineIsometry {
                linear: DMatrix::from_row_slice(n, n, &e.linear),
                shift: DVector::from_column_slice(&e.shift),
            })
            .collect();
        let p = fixed_point_of_finite_group(&isometries)?;
        ctx.manifest.stage("fixed_point");
        ctx.manifest.audit(AuditRecord::at_most(
            "fixed_point",
            "max |g(p) − p| ≤ 1e-12",
            p.max_defect,
            GROUP_TOLERANCE,
        ));
        fixed = Some(p.point.iter().cloned().collect());
    }
    ctx.out.write(
        "ale.json",
        &json(&AleReport {
            lift: &lift,
            group_order: group.order(),
            incompressible_declared: sec.incompressible,
            fixed_point: fixed,
        }),
    )?;
    Ok(())
}

#[derive(Serialize)]
struct CurvatureRow {
    radius: f64,
    step: f64,
    scalar: f64,
    error: Option<f64>,
    bound: Option<f64>,
    order: Option<f64>,
}

#[derive(Serialize)]
struct MassRow {
    radii: Vec<f64>,
    extrapolated: f64,
    observed_order: Option<f64>,
    last_partial: f64,
}

#[derive(Serialize)]
struct ConvergeReport {
    curvature: Vec<CurvatureRow>,
    mass: Vec<MassRow>,
}

pub fn cmd_converge(ctx: Context) -> Result<(), RunError> {
    let cfg = ctx.cfg;
    let sec = SceneConfig::require(&cfg.converge, "converge")?;
    let metric = build_metric(cfg)?;
    let exact = exact_scalar(cfg);
    let n = cfg.dimension;
    let mut rows = Vec::new();
    for &r in &sec.radii {
        let mut x = vec![0.0; n];
        x[0] = r;
        let values = sec
            .steps
            .iter()
            .map(|h| scalar_curvature_bartnik(&metric, &x, *h))
            .collect::<masskit::Result<Vec<f64>>>()?;
        let errors: Vec<Option<f64>> = values
            .iter()
            .map(|v| exact.as_ref().map(|e| (v - e(r)).abs()))
            .collect();
        for (i, &h) in sec.steps.iter().enumerate() {
            let order = if i == 0 {
                None
            } else {
                let ratio = (sec.steps[i - 1] / h).ln();
                match (errors[i - 1], errors[i]) {
                    (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some((a / b).ln() / ratio),
                    (Some(_), Some(_)) => None,
                    _ if i >= 2 => {
                        let d1 = (values[i - 2] - values[i - 1]).abs();
                        let d2 = (values[i - 1] - values[i]).abs();
                        (d1 > 0.0 && d2 > 0.0).then(|| (d1 / d2).ln() / ratio)
                    }
                    _ => None,
                }
            };
            let bound = errors[i].map(|_| sec.constant * h * h);
            rows.push(CurvatureRow {
                radius: r,
                step: h,
                scalar: values[i],
                error: errors[i],
                bound,
                order,
            });
        }
    }
    ctx.manifest.stage("scalar_curvature_refinement");
    for row in &rows {
        let tag = format!("r{}_h{}", row.radius, row.step);
        if let (Some(e), Some(b)) = (row.error, row.bound) {
            ctx.manifest.audit(AuditRecord::at_most(
                &format!("{tag}_error"),
                "|R_h − R| ≤ C h²",
                e,
                b,
            ));
        }
        if let Some(p) = row.order {
            let [lo, hi] = sec.order_band;
            let miss = if p < lo { lo - p } else if p > hi { p - hi } else { 0.0 };
            ctx.manifest.audit(AuditRecord::at_most(
                &format!("{tag}_order"),
                &format!("observed order in [{lo}, {hi}]"),
                miss,
                0.0,
            ));
        }
    }

    let mut mass_rows = Vec::new();
    for ladder in &sec.mass_ladders {
        let rep = adm_mass(&metric, ladder, cfg.quadrature_order())?;
        mass_rows.push(MassRow {
            radii: ladder.clone(),
            extrapolated: rep.extrapolated,
            observed_order: rep.observed_order,
            last_partial: *rep.partial_masses.last().expect("ladder is nonempty"),
        });
    }
    if !mass_rows.is_empty() {
        ctx.manifest.stage("mass_refinement");
    }

    let mut csv = String::from("radius,step,scalar_curvature,error,bound,observed_order\n");
    let opt = |v: Option<f64>| v.map(|v| format!("{v:.6e}")).unwrap_or_default();
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{:.12e},{},{},{}\n",
            row.radius,
            row.step,
            row.scalar,
            opt(row.error),
            opt(row.bound),
            opt(row.order)
        ));
    }
    ctx.out.write("converge.csv", &csv)?;
    let mut mcsv = String::from("radii,extrapolated,observed_order,last_partial\n");
    for m in &mass_rows {
        let radii: Vec<String> = m.radii.iter().map(|r| r.to_string()).collect();
        mcsv.push_str(&format!(
            "{},{:.12e},{},{:.12e}\n",
            radii.join(" "),
            m.extrapolated,
            opt(m.observed_order),
            m.last_partial
        ));
    }
    ctx.out.write("mass_refinement.csv", &mcsv)?;
    ctx.out.write(
        "converge.json",
        &json(&ConvergeReport {
            curvature: rows,
            mass: mass_rows,
        }),
    )?;
    Ok(())
}
