use masskit::compactification::*;
use masskit::geometry::{radius, MetricSpec, ScalarFn};
use masskit::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn monopole_state() -> LohkampState {
    lohkamp_cutoff(&HarmonicFactor::monopole(3, -0.5).unwrap(), 8.0, 3.0).unwrap()
}

#[test]
fn cutoff_epsilon_comes_from_the_sphere_supremum() {
    let state = monopole_state();
    // u = 1 − 1/(4r), so 1 − u(8) = 1/32
    assert!((state.epsilon() - 1.0 / 32.0).abs() <= 1e-15);
    let c = state.cutoff;
    assert!((c.lower - (1.0 - 0.75 / 32.0)).abs() <= 1e-15);
    assert!((c.upper - (1.0 - 0.25 / 32.0)).abs() <= 1e-15);
    // u reaches the upper branch point at r = 1/(4 · ε/4) = 32
    assert!((state.r_flat - 32.0).abs() <= 1e-9 * 32.0);
}

#[test]
fn cutoff_branches_join_to_second_order() {
    let c = ConcaveCutoff::new(0.1).unwrap();
    assert_eq!(c.value(c.lower), c.lower);
    assert!((c.value(c.upper - 1e-15) - c.plateau).abs() <= 1e-14);
    assert_eq!(c.value(c.upper + 0.01), c.plateau);
    let (d1_lo, d2_lo) = c.derivatives(c.lower + 1e-12);
    assert!((d1_lo - 1.0).abs() <= 1e-9 && d2_lo.abs() <= 1e-8);
    let (d1_hi, d2_hi) = c.derivatives(c.upper - 1e-12);
    assert!(d1_hi.abs() <= 1e-9 && d2_hi.abs() <= 1e-8);
    assert!(c.in_transition(0.5 * (c.lower + c.upper)));
    assert!(!c.in_transition(c.lower) && !c.in_transition(c.upper));
    assert!(matches!(ConcaveCutoff::new(1.0), Err(Error::Config(_))));
    assert!(matches!(ConcaveCutoff::new(0.0), Err(Error::Config(_))));
}

#[test]
fn laplacian_of_radial_cutoff_matches_closed_form() {
    let state = monopole_state();
    let a = 0.25;
    for r in [12.0, 16.0, 24.0, 30.0] {
        let x = [r * 0.6, 0.0, r * 0.8];
        let u = 1.0 - a / r;
        assert!(state.cutoff.in_transition(u));
        // Δu = 0 and |∇u|² = a²/r⁴
        let expected = state.cutoff.derivatives(u).1 * a * a / r.powi(4);
        let (lap_v, lap_u) = state.laplacians(&x);
        assert!(lap_u.abs() <= 1e-10);
        assert!((lap_v - expected).abs() <= 1e-6 * expected.abs(), "r={r}: {lap_v} vs {expected}");
        assert!(lap_v < 0.0);
    }
    // outside the band v is harmonic or constant
    assert!(state.laplacians(&[5.0, 0.0, 0.0]).0.abs() <= 1e-10);
    assert_eq!(state.laplacians(&[40.0, 0.0, 0.0]).0, 0.0);
}

#[test]
fn flattened_metric_is_nonnegative_and_constant_far_out() {
    let factor = HarmonicFactor::new(3, -0.5, vec![0.1, 0.0, 0.0]).unwrap();
    let state = lohkamp_cutoff(&factor, 8.0, 3.0).unwrap();
    let options = SuperharmonicOptions::default();
    let audit = check_superharmonic(&state, &options).unwrap();
    assert!(audit.passed);
    assert!(audit.max_laplacian <= 1e-10);
    assert!(audit.band_min < 0.0);
    let lm = lohkamp_metric(&state, &audit, &options).unwrap();
    assert!(lm.min_scalar >= CURVATURE_FLOOR);
    assert!(lm.max_scalar > POSITIVE_WITNESS);
    let g = lm.metric.components(&[0.0, 2.0 * state.r_flat, 0.0]);
    assert_eq!(g, DMatrix::identity(3, 3) * state.flat_constant());
}

#[test]
fn positive_mass_has_no_cutoff_sphere() {
    let result = lohkamp_cutoff(&HarmonicFactor::monopole(3, 0.5).unwrap(), 8.0, 3.0);
    assert!(matches!(result, Err(Error::Precondition { .. })));
    assert!(matches!(
        lohkamp_cutoff(&HarmonicFactor::monopole(3, -0.5).unwrap(), 3.1, 3.0),
        Err(Error::Config(_))
    ));
    assert!(matches!(HarmonicFactor::new(3, -0.5, vec![0.0; 2]), Err(Error::Config(_))));
}

#[test]
fn torus_chart_of_flattened_end_is_periodic() {
    let state = monopole_state();
    let st = state.clone();
    let scalar = move |x: &[f64]| st.scalar_curvature(x);
    let spec = TorusGlueSpec::around(state.r_flat, state.sampling_floor());
    let torus = torus_glue(&state.metric(), &scalar, &spec).unwrap();
    assert_eq!(torus.periodicity_defect, 0.0);
    assert!(torus.nonnegative && torus.positive_somewhere);
    assert!(torus.passed());
    let rendered = torus.render();
    let header: serde_json::Value = serde_json::from_str(rendered.lines().next().unwrap()).unwrap();
    assert_eq!(header["dimension"], 3);
    assert_eq!(header["rows"].as_u64().unwrap() as usize, rendered.lines().count() - 2);

    // a cube whose collar reaches inside r_flat is not constant there
    let mut shrunk = TorusGlueSpec::around(state.r_flat, state.sampling_floor());
    shrunk.side = 2.0 * state.r_flat;
    shrunk.collar = shrunk.side / 8.0;
    assert!(matches!(torus_glue(&state.metric(), &scalar, &shrunk), Err(Error::Audit { .. })));
}

#[test]
fn flat_torus_has_no_positive_witness() {
    let zero = |_: &[f64]| Ok(0.0);
    let torus = torus_glue(&MetricSpec::euclidean(3), &zero, &TorusGlueSpec::around(4.0, 1.5)).unwrap();
    assert_eq!(torus.periodicity_defect, 0.0);
    assert!(torus.nonnegative);
    assert!(!torus.positive_somewhere);
    assert!(!torus.passed());
}

fn complex_structure() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[0.0, -1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0],
    )
}

#[test]
fn group_generation_closure_and_freeness() {
    let cyclic = GroupAction::new(4, vec![complex_structure()]).unwrap();
    assert_eq!(cyclic.order(), 4);
    assert!(cyclic.closure_defect() <= GROUP_TOLERANCE);
    assert!((cyclic.freeness_margin().0 - 2f64.sqrt()).abs() <= 1e-12);
    assert_eq!(GroupAction::antipodal(3).order(), 2);
    assert_eq!(GroupAction::trivial(4).freeness_margin().0, f64::INFINITY);

    // a rotation of one plane fixes the other
    let mut plane = complex_structure();
    plane.view_mut((2, 2), (2, 2)).fill_with_identity();
    assert!(matches!(GroupAction::new(4, vec![plane]), Err(Error::Precondition { .. })));

    let skew = DMatrix::from_row_slice(3, 3, &[1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    assert!(matches!(GroupAction::new(3, vec![skew]), Err(Error::Precondition { .. })));
    let (c, s) = (1.0f64.cos(), 1.0f64.sin());
    let irrational = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, -1.0]);
    assert!(matches!(GroupAction::new(3, vec![irrational]), Err(Error::Config(_))));
    assert!(matches!(GroupAction::from_row_major(3, &[vec![1.0; 4]]), Err(Error::Config(_))));
}

#[test]
fn ale_lift_multiplies_mass_by_group_order() {
    let radii = [8.0, 16.0, 32.0, 64.0];
    let quotient = MetricSpec::schwarzschild(4, 1.0);
    let group = GroupAction::new(4, vec![complex_structure()]).unwrap();
    let lift = ale_lift(&quotient, &group, &radii, 8).unwrap();
    assert!(lift.passed);
    assert!((lift.mass_ratio - 4.0).abs() <= 4e-3);
    assert!(lift.invariance_defect <= GROUP_TOLERANCE);

    let lopsided = MetricSpec::conformally_flat(
        4,
        ScalarFn::general(|x| 1.0 + 0.5 / radius(x).powi(2) + 0.3 * x[0] / radius(x).powi(4)),
    );
    assert!(matches!(
        ale_lift(&lopsided, &GroupAction::antipodal(4), &radii, 8),
        Err(Error::Precondition { .. })
    ));
    assert!(matches!(
        ale_lift(&MetricSpec::schwarzschild(3, 1.0), &group, &radii, 8),
        Err(Error::Config(_))
    ));
}

#[test]
fn fixed_points_of_affine_groups() {
    let id = AffineIsometry::linear(DMatrix::identity(2, 2));
    let c = DVector::from_vec(vec![3.0, -1.0]);
    let quarter = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let group: Vec<AffineIsometry> = (0..4).map(|k| AffineIsometry::about(quarter.pow(k), &c)).collect();
    let p = fixed_point_of_finite_group(&group).unwrap();
    assert!((p.point - &c).norm() <= 1e-12);
    assert!(p.max_defect <= GROUP_TOLERANCE);

    // composition of a rotation about c with its inverse is the identity
    let back = group[1].compose(&group[3]);
    let x = DVector::from_vec(vec![0.7, 2.2]);
    assert!((back.apply(&x) - &x).norm() <= 1e-12);

    let shifted = [id.clone(), AffineIsometry::translation(DVector::from_vec(vec![0.0, 2.0]))];
    assert!(matches!(fixed_point_of_finite_group(&shifted), Err(Error::Audit { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cutoff_is_concave_and_below_identity(eps in 0.01f64..0.9, s in 0.0f64..1.0) {
        let c = ConcaveCutoff::new(eps).unwrap();
        let t = c.lower - 0.1 + s * (c.upper - c.lower + 0.2);
        prop_assert!(c.value(t) <= t + 1e-15);
        prop_assert!(c.value(t) <= c.plateau);
        let (d1, d2) = c.derivatives(t);
        prop_assert!(d2 <= 0.0);
        prop_assert!((0.0..=1.0).contains(&d1));
    }

    #[test]
    fn central_symmetry_fixes_its_centre(cx in -5.0f64..5.0, cy in -5.0f64..5.0, cz in -5.0f64..5.0) {
        let c = DVector::from_vec(vec![cx, cy, cz]);
        let group = [
            AffineIsometry::linear(DMatrix::identity(3, 3)),
            AffineIsometry::about(-DMatrix::<f64>::identity(3, 3), &c),
        ];
        let p = fixed_point_of_finite_group(&group).unwrap();
        prop_assert!((p.point - c).norm() <= 1e-12 * (1.0 + cx.abs() + cy.abs() + cz.abs()));
    }
}
