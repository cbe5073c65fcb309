use approx::assert_abs_diff_eq;
use masskit::geometry::*;
use masskit::Error;
use masskit_oracle::radial_conformal_scalar;
use nalgebra::{DMatrix, Rotation3, Unit, Vector3};
use proptest::prelude::*;

/// `(2/(1+r²))² δ`, the unit round sphere in stereographic coordinates.
fn round_sphere() -> MetricSpec {
    MetricSpec::conformally_flat(3, ScalarFn::radial(|r| (2.0 / (1.0 + r * r)).sqrt())).with_inner_radius(0.1)
}

/// A non-radial conformal factor: monopole plus dipole.
fn dipole_metric() -> MetricSpec {
    MetricSpec::conformally_flat(
        3,
        ScalarFn::general(|x| {
            let r = radius(x);
            1.0 + 0.3 / r + 0.2 * x[0] / (r * r * r) + 0.05 * (-r * r / 16.0).exp()
        }),
    )
}

#[test]
fn euclidean_curvatures_vanish() {
    let g = MetricSpec::euclidean(3);
    let x = [2.0, -1.0, 0.5];
    let c = christoffel_first_kind(&g, &x, 0.02).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                assert_eq!(c.get(i, j, k), 0.0);
            }
        }
    }
    assert_eq!(scalar_curvature_bartnik(&g, &x, 0.02).unwrap(), 0.0);
    assert_eq!(ricci_tensor_fd(&g, &x, 0.02).unwrap().amax(), 0.0);
}

#[test]
fn schwarzschild_christoffels_match_closed_form() {
    let g = MetricSpec::schwarzschild(3, 1.0);
    let x = [2.0, 0.0, 0.0];
    let h = default_step(2.0);
    let c = christoffel_first_kind(&g, &x, h).unwrap();
    // g = ψδ with ψ = (1 + 1/(2r))⁴, so ∂_k g_ij = ψ' x_k/r δ_ij
    let r: f64 = 2.0;
    let dpsi = 4.0 * (1.0 + 0.5 / r).powi(3) * (-0.5 / (r * r));
    let e = |i: usize| if i == 0 { 1.0 } else { 0.0 };
    let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                let exact = 0.5 * dpsi * (d(j, k) * e(i) + d(i, k) * e(j) - d(i, j) * e(k));
                assert_abs_diff_eq!(c.get(i, j, k), exact, epsilon = 10.0 * h * h);
            }
        }
    }
}

#[test]
fn christoffel_symmetrization_recovers_metric_derivative() {
    let g = MetricSpec::perturbed(
        MetricSpec::euclidean(3),
        Perturbation::general(|x| {
            let r = radius(x);
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.1 / r, 0.2 / r, -0.1 / r]))
        }),
    );
    let x = [3.0, 0.0, 0.0];
    let h = 0.02;
    let c = christoffel_first_kind(&g, &x, h).unwrap();
    let dg = metric_gradient(&g, &x, h);
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                assert_abs_diff_eq!(c.get(i, k, j) + c.get(j, k, i), dg[k][(i, j)], epsilon = 1e-13);
            }
        }
    }
}

#[test]
fn schwarzschild_scalar_curvature_converges_quadratically() {
    let g = MetricSpec::schwarzschild(3, 1.0);
    for x in [[4.0, 0.0, 0.0], [1.5, 1.5, 1.0], [0.0, -2.0, 3.0]] {
        let coarse = scalar_curvature_bartnik(&g, &x, 0.04).unwrap().abs();
        let fine = scalar_curvature_bartnik(&g, &x, 0.02).unwrap().abs();
        assert!(coarse <= 10.0 * 0.04 * 0.04);
        let ratio = coarse / fine;
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio} at {x:?}");
    }
}

#[test]
fn round_sphere_has_curvature_six_and_is_einstein() {
    let g = round_sphere();
    // curvature radius 1: the truncation constant is O(10), so allow C = 20
    let h = 0.01;
    for x in [[1.0, 0.0, 0.0], [0.3, 0.4, -0.5], [0.0, 1.2, 0.9]] {
        let r = scalar_curvature_bartnik(&g, &x, h).unwrap();
        assert_abs_diff_eq!(r, 6.0, epsilon = 20.0 * h * h);
        let coarse = scalar_curvature_bartnik(&g, &x, 2.0 * h).unwrap();
        let ratio = (coarse - 6.0) / (r - 6.0);
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
        let ric = ricci_tensor_fd(&g, &x, h).unwrap();
        let metric = g.components(&x);
        assert!((ric - 2.0 * metric).amax() <= 20.0 * h * h);
    }
}

#[test]
fn conformal_formula_agrees_with_finite_differences() {
    // φ = 1 + e^{−r²} on flat space, evaluated at r = 1
    let g = MetricSpec::conformally_flat(3, ScalarFn::radial(|r| 1.0 + (-r * r).exp())).with_inner_radius(0.1);
    let r: f64 = 1.0;
    let e = (-r * r).exp();
    let (phi, dphi, ddphi) = (1.0 + e, -2.0 * r * e, (4.0 * r * r - 2.0) * e);
    let lap = ddphi + 2.0 * dphi / r;
    let closed = scalar_curvature_conformal(3, 0.0, phi, lap).unwrap();
    assert_abs_diff_eq!(closed, radial_conformal_scalar(3, r, phi, dphi, ddphi), epsilon = 1e-13);
    let h = 0.01;
    let fd = scalar_curvature_bartnik(&g, &[r, 0.0, 0.0], h).unwrap();
    assert_abs_diff_eq!(fd, closed, epsilon = 10.0 * h * h);
}

#[test]
fn conformal_formula_trivial_cases() {
    assert_eq!(scalar_curvature_conformal(3, 2.5, 1.0, 0.0).unwrap(), 2.5);
    assert_eq!(scalar_curvature_conformal(4, 0.0, 1.3, 0.0).unwrap(), 0.0);
    assert!(matches!(
        scalar_curvature_conformal(3, 0.0, 0.0, 1.0),
        Err(Error::Positivity(_))
    ));
}

#[test]
fn schwarzschild_ricci_is_traceless_and_matches_radial_form() {
    let m = 1.0;
    let g = MetricSpec::schwarzschild(3, m);
    let h = 0.02;
    let x = [3.0, 0.0, 0.0];
    let ric = ricci_tensor_fd(&g, &x, h).unwrap();
    let trace = ricci_trace(&g, &x, &ric).unwrap();
    assert!(trace.abs() <= 10.0 * h * h);
    // φ⁴δ with harmonic φ: Ric = −2φ⁻¹∇²φ + 6φ⁻²dφ⊗dφ − 2φ⁻²|dφ|²δ
    let r: f64 = 3.0;
    let phi = 1.0 + m / (2.0 * r);
    let dphi = -m / (2.0 * r * r);
    let ddphi = m / (r * r * r);
    let radial = -2.0 / phi * ddphi + 6.0 / (phi * phi) * dphi * dphi - 2.0 / (phi * phi) * dphi * dphi;
    let tangential = -2.0 / phi * dphi / r - 2.0 / (phi * phi) * dphi * dphi;
    assert_abs_diff_eq!(ric[(0, 0)], radial, epsilon = 10.0 * h * h);
    assert_abs_diff_eq!(ric[(1, 1)], tangential, epsilon = 10.0 * h * h);
    assert_abs_diff_eq!(ric[(0, 1)], 0.0, epsilon = 1e-12);
}

#[test]
fn stencil_leaving_the_chart_is_a_domain_error() {
    let g = MetricSpec::schwarzschild(3, 1.0).with_inner_radius(2.0);
    let err = scalar_curvature_bartnik(&g, &[2.05, 0.0, 0.0], 0.05).unwrap_err();
    assert!(matches!(err, Error::Domain { .. }));
    assert!(matches!(
        ricci_tensor_fd(&g, &[2.05, 0.0, 0.0], 0.05),
        Err(Error::Domain { .. })
    ));
    assert!(scalar_curvature_bartnik(&g, &[2.2, 0.0, 0.0], 0.05).is_ok());
}

#[test]
fn decay_audit_measures_schwarzschild_order() {
    let report = decay_audit(&MetricSpec::schwarzschild(3, 1.0), &[8.0, 16.0, 32.0, 64.0]).unwrap();
    assert!(report.passed());
    let lead = report.orders[0].measured.unwrap();
    assert!((lead + 1.0).abs() < 0.1, "measured {lead}");

    let flat = decay_audit(&MetricSpec::euclidean(3), &[8.0, 16.0, 32.0, 64.0]).unwrap();
    assert!(flat.passed());
    assert!(flat.orders.iter().all(|o| o.constant == 0.0));

    // faster than declared is accepted
    let fast = MetricSpec::perturbed(
        MetricSpec::euclidean(3),
        Perturbation::general(|x| {
            let r = radius(x);
            DMatrix::from_fn(3, 3, |i, j| 0.1 * x[i] * x[j] / r.powi(4))
        }),
    );
    assert!(decay_audit(&fast, &[8.0, 16.0, 32.0, 64.0]).unwrap().passed());
}

fn unit_point() -> impl Strategy<Value = [f64; 3]> {
    (0.0..std::f64::consts::PI, 0.0..2.0 * std::f64::consts::PI)
        .prop_map(|(t, p)| [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bartnik_matches_conformal_formula(a in 0.05f64..1.0, r in 1.5f64..6.0, dir in unit_point()) {
        // φ = 1 + a/r + a²/r², radial and non-harmonic
        let g = MetricSpec::conformally_flat(3, ScalarFn::radial(move |r| 1.0 + a / r + a * a / (r * r)));
        let phi = 1.0 + a / r + a * a / (r * r);
        let dphi = -a / (r * r) - 2.0 * a * a / (r * r * r);
        let ddphi = 2.0 * a / (r * r * r) + 6.0 * a * a / r.powi(4);
        let exact = radial_conformal_scalar(3, r, phi, dphi, ddphi);
        let x: Vec<f64> = dir.iter().map(|c| c * r).collect();
        let h = 0.01;
        let fd = scalar_curvature_bartnik(&g, &x, h).unwrap();
        prop_assert!((fd - exact).abs() <= 10.0 * h * h, "fd {fd} exact {exact}");
    }

    #[test]
    fn ricci_trace_matches_scalar(r in 2.0f64..6.0, dir in unit_point()) {
        let g = dipole_metric();
        let x: Vec<f64> = dir.iter().map(|c| c * r).collect();
        let h = 0.02;
        let ric = ricci_tensor_fd(&g, &x, h).unwrap();
        let trace = ricci_trace(&g, &x, &ric).unwrap();
        let scalar = scalar_curvature_bartnik(&g, &x, h).unwrap();
        prop_assert!((trace - scalar).abs() <= 10.0 * h * h);
    }

    #[test]
    fn scalar_curvature_is_chart_rotation_invariant(
        r in 2.0f64..6.0,
        dir in unit_point(),
        axis in unit_point(),
        angle in 0.0f64..std::f64::consts::TAU,
    ) {
        let g = dipole_metric();
        let axis = Unit::new_normalize(Vector3::new(axis[0], axis[1], axis[2]));
        let q = Rotation3::from_axis_angle(&axis, angle);
        let qm = DMatrix::from_fn(3, 3, |i, j| q.matrix()[(i, j)]);
        let gq = rotated(&g, qm);
        let x = Vector3::new(dir[0] * r, dir[1] * r, dir[2] * r);
        let qx = q * x;
        let h = 0.02;
        let lhs = scalar_curvature_bartnik(&gq, x.as_slice(), h).unwrap();
        let rhs = scalar_curvature_bartnik(&g, qx.as_slice(), h).unwrap();
        prop_assert!((lhs - rhs).abs() <= 10.0 * h * h, "{lhs} vs {rhs}");
    }

    #[test]
    fn schwarzschild_components_are_positive_definite(m in -0.9f64..3.0, r in 2.0f64..100.0, dir in unit_point()) {
        let g = MetricSpec::schwarzschild(3, m);
        let x: Vec<f64> = dir.iter().map(|c| c * r).collect();
        let c = g.components(&x);
        prop_assert_eq!(c.clone(), c.transpose());
        prop_assert!(c.symmetric_eigenvalues().min() > 0.0);
    }
}
