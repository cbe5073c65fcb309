use masskit::cutoff::{eta, zeta};
use masskit::density::*;
use masskit::geometry::{MetricSpec, ScalarFn};
use masskit::Error;
use proptest::prelude::*;

const C_S: f64 = 5.48;

fn series(c1: f64, c2: f64) -> MetricSpec {
    MetricSpec::conformally_flat(3, ScalarFn::radial(move |r| 1.0 + c1 / r + c2 / (r * r))).with_inner_radius(0.5)
}

fn options(ladder: &[f64]) -> DensityOptions {
    DensityOptions {
        s_ladder: ladder.to_vec(),
        sobolev_constant: Some(C_S),
        ..DensityOptions::default()
    }
}

fn at(r: f64) -> Vec<f64> {
    // off-axis so every component is exercised
    let d = [0.48, 0.6, 0.64];
    d.iter().map(|c| r * c).collect()
}

#[test]
fn split_at_own_mass_leaves_no_remainder() {
    let g = MetricSpec::schwarzschild(3, 1.3);
    let split = split_schwarzschild(&g, 1.3);
    for r in [1.5, 4.0, 40.0] {
        let x = at(r);
        let diff = g.components(&x) - split.schwarzschild().components(&x);
        assert!(diff.amax() <= 1e-15, "r={r}: {diff}");
        let ghat = build_interpolated_metric(&split, 8.0).unwrap();
        assert!((ghat.components(&x) - g.components(&x)).amax() <= 1e-15);
    }
}

#[test]
fn interpolation_is_exact_off_the_transition_and_convex_on_it() {
    let g = series(0.5, -0.25);
    let split = split_schwarzschild(&g, 1.0);
    let s = 8.0;
    let ghat = build_interpolated_metric(&split, s).unwrap();
    let schw = split.schwarzschild();
    for r in [1.0, 5.0, 2.0 * s] {
        assert_eq!(ghat.components(&at(r)), g.components(&at(r)), "inner r={r}");
    }
    for r in [3.0 * s, 5.0 * s, 100.0 * s] {
        assert_eq!(ghat.components(&at(r)), schw.components(&at(r)), "plateau r={r}");
    }
    for t in [2.25, 2.5, 2.75] {
        let x = at(t * s);
        let w = zeta(t);
        let expected = g.components(&x) * (1.0 - w) + schw.components(&x) * w;
        assert!((ghat.components(&x) - expected).amax() <= 1e-14, "t={t}");
    }
    assert!(matches!(build_interpolated_metric(&split, 1.0), Err(Error::Config(_))));
}

/// `∫_s^{4s} |S²| α β² g(r) dr` by composite Simpson.
fn volume_integral(metric: &MetricSpec, s: f64, g: impl Fn(f64) -> f64) -> f64 {
    let m = 6000;
    let h = 3.0 * s / m as f64;
    let mut acc = 0.0;
    for j in 0..=m {
        let r = s + j as f64 * h;
        let c = metric.radial_components(r).unwrap();
        let w = if j == 0 || j == m {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * c.g_rr().sqrt() * c.areal_radius(r).powi(2) * g(r);
    }
    4.0 * std::f64::consts::PI * acc * h / 3.0
}

#[test]
fn delta_choice_matches_a_brute_force_scan() {
    let g = series(0.5, -0.25);
    let split = split_schwarzschild(&g, 1.0);
    let s = 8.0;
    let ghat = build_interpolated_metric(&split, s).unwrap();
    let (_, samples) = scalar_bounds_audit(&ghat, s, 0.6, 601).unwrap();
    let lhs = |delta: f64| {
        volume_integral(&ghat, s, |r| {
            let e = eta(r / s);
            (-(e * samples.transition.eval(r) - delta * e)).max(0.0).powf(1.5)
        })
        .powf(2.0 / 3.0)
    };

    let loose = choose_delta(&ghat, &samples, C_S).unwrap();
    let volume = volume_integral(&ghat, s, |_| 1.0);
    assert!((loose.volume - volume).abs() <= 1e-6 * volume);
    assert_eq!(loose.delta, loose.delta0);
    assert!(loose.delta * (1.0 + loose.volume) <= 1.0 / s);

    // a constant small enough that the smallness bound binds
    let tight_cs = lhs(0.0) + lhs(loose.delta0);
    let tight = choose_delta(&ghat, &samples, tight_cs).unwrap();
    assert!(tight.delta < tight.delta0);
    assert!(tight.smallness_margin() >= 0.0);
    let grid: Vec<f64> = (0..=400).map(|k| tight.delta0 * k as f64 / 400.0).collect();
    let best = grid.iter().rev().find(|d| lhs(**d) <= tight_cs / 2.0).copied().unwrap();
    assert!(tight.delta >= best * (1.0 - 1e-3) && tight.delta <= best + tight.delta0 / 400.0 * 1.001,
        "{} vs scan {best}", tight.delta);

    assert!(matches!(choose_delta(&ghat, &samples, 1e-30), Err(Error::Regime(_))));
}

#[test]
fn schwarzschild_input_needs_no_correction() {
    let g = MetricSpec::schwarzschild(3, 1.0).with_inner_radius(0.5);
    let result = density_deform(&g, &options(&[8.0])).unwrap();
    assert_eq!(result.input_mass, 1.0);
    for rung in &result.rungs {
        assert_eq!(rung.a_integral, 0.0);
        assert_eq!(rung.m_bar, 1.0);
        assert!(rung.min_r >= -CURVATURE_FLOOR);
    }
}

#[test]
fn toy_deformation_bookkeeping() {
    let result = density_deform(&series(0.5, -0.25), &options(&[8.0, 16.0])).unwrap();
    assert_eq!(result.rungs.len(), 2);
    for rung in &result.rungs {
        let identity = rung.m_bar - result.input_mass - 2.0 * rung.a_integral / (1.0 + rung.tau);
        assert!(identity.abs() <= 4.0 * f64::EPSILON * result.input_mass.abs().max(1.0));
        assert!(rung.min_u_tau >= rung.min_u_bound);
        assert!((rung.min_u_bound - rung.tau / (1.0 + rung.tau)).abs() <= 1e-15);
        assert!(rung.min_r >= -CURVATURE_FLOOR);
        assert!(rung.delta.ceiling_product <= rung.delta.ceiling);
        assert!(rung.closed_form_passed());
    }
    assert!(result.rungs[1].a_integral.abs() < result.rungs[0].a_integral.abs());
    let csv = result.trend_csv();
    assert!(csv.starts_with("s,delta_s,A_integral,A_fit,tau,m_bar,min_R,end_norm,v_sup"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn negative_scalar_curvature_is_out_of_regime() {
    let result = density_deform(&series(0.5, 0.25), &options(&[8.0]));
    assert!(matches!(result, Err(Error::Regime(_))), "{result:?}");
}

#[test]
fn ladder_contract() {
    let g = MetricSpec::schwarzschild(3, 1.0);
    assert!(matches!(density_deform(&g, &options(&[16.0, 8.0])), Err(Error::Config(_))));
    assert!(matches!(density_deform(&g, &options(&[1.0])), Err(Error::Config(_))));
    assert!(matches!(density_deform(&g, &options(&[])), Err(Error::Config(_))));
}

#[test]
fn scalar_probe_on_flat_space_is_trivial() {
    let report = rigidity_probe_scalar(
        &MetricSpec::euclidean(3).with_inner_radius(0.5),
        &ScalarProbeOptions {
            sobolev_constant: Some(C_S),
            ..ScalarProbeOptions::default()
        },
    )
    .unwrap();
    assert!(report.trivial);
    assert_eq!(report.a_integral, 0.0);
    assert_eq!(report.measured_shift, 0.0);
}

#[test]
fn ricci_probe_needs_nonzero_ricci() {
    let spec = RigidityProbeSpec {
        sobolev_constant: Some(C_S),
        ..RigidityProbeSpec::default()
    };
    let flat = MetricSpec::euclidean(3).with_inner_radius(0.25);
    assert!(matches!(rigidity_probe_ricci(&flat, &spec), Err(Error::Precondition { .. })));
    let shallow = MetricSpec::schwarzschild(3, 1.0).with_inner_radius(0.6);
    assert!(matches!(rigidity_probe_ricci(&shallow, &spec), Err(Error::Config(_))));
}

#[test]
fn ricci_deformation_is_linear_in_epsilon() {
    let g = MetricSpec::schwarzschild(3, 1.0).with_inner_radius(0.25);
    let deformed = |epsilon: f64| {
        let spec = RigidityProbeSpec {
            epsilon,
            ..RigidityProbeSpec::default()
        };
        ricci_deformed_metric(&g, &spec).unwrap()
    };
    let (a, b) = (deformed(0.1), deformed(0.05));
    for r in [1.2, 2.5, 3.7] {
        let x = at(r);
        let base = g.components(&x);
        let da = a.components(&x) - &base;
        let db = b.components(&x) - &base;
        assert!(da.amax() > 1e-4);
        assert!((da - db * 2.0).amax() <= 1e-14, "r={r}");
    }
    // no change outside the bump
    for r in [0.9, 4.5] {
        assert_eq!(a.components(&at(r)), g.components(&at(r)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn corrected_curvature_is_nonnegative_without_transition(
        r_hat in 0.0f64..1.0, eta_value in 0.0f64..1.0, delta in 0.0f64..0.1,
        u_s in 0.1f64..2.0, tau in 1e-6f64..1.0,
    ) {
        prop_assert!(corrected_scalar_curvature(3, r_hat, eta_value, delta, u_s, tau) >= 0.0);
    }

    #[test]
    fn corrected_curvature_reduces_to_input_when_untouched(r_hat in -1.0f64..1.0, tau in 1e-6f64..1.0) {
        // u_s = 1 and η = 0: ḡ is ĝ up to the constant factor, so R scales by (1+τ)^0 = 1
        let v = corrected_scalar_curvature(3, r_hat, 0.0, 0.0, 1.0, tau);
        prop_assert!((v - r_hat).abs() <= 1e-12 * (1.0 + r_hat.abs()));
    }
}
