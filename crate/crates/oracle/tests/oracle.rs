use std::f64::consts::PI;

use masskit_oracle::*;

#[test]
fn sphere_areas_in_higher_dimensions() {
    assert!((sphere_area(0) - 2.0).abs() < 1e-14);
    assert!((sphere_area(4) - 8.0 * PI * PI / 3.0).abs() < 1e-12);
    assert!((sphere_area(5) - PI.powi(3)).abs() < 1e-12);
}

#[test]
fn schwarzschild_partial_mass_tends_to_mass() {
    for n in [3, 4, 5] {
        let m = 0.7;
        assert!((schwarzschild_partial_mass(n, m, 1e6) - m).abs() < 1e-5);
    }
    // n = 6 makes the exponent vanish
    assert_eq!(schwarzschild_partial_mass(6, 0.7, 3.0), 0.7);
}

#[test]
fn harmonic_factor_is_scalar_flat() {
    for n in [3, 4, 5] {
        let e = n as i32 - 2;
        let r: f64 = 2.5;
        let phi = 1.0 + 0.3 / r.powi(e);
        let dphi = -(e as f64) * 0.3 / r.powi(e + 1);
        let ddphi = (e * (e + 1)) as f64 * 0.3 / r.powi(e + 2);
        assert!(radial_conformal_scalar(n, r, phi, dphi, ddphi).abs() < 1e-14);
    }
}

#[test]
fn shooting_matches_piecewise_constant_potential() {
    // f = k² on [1, R], zero beyond; w = (sinh(k(r−1)) + k cosh(k(r−1)))/r inside
    let (k, big_r) = (0.4, 3.0);
    let alpha = |_: f64| 1.0;
    let beta = |r: f64| r;
    let model = RadialModel {
        dim: 3,
        r_in: 1.0,
        alpha: &alpha,
        beta: &beta,
    };
    // the last RK4 stage may land a rounding error past R
    let f = move |r: f64| if r <= big_r + 1e-9 { k * k } else { 0.0 };
    let result = shoot(&model, &f, big_r, 4000);

    let t = big_r - 1.0;
    let g = (k * t).sinh() + k * (k * t).cosh();
    let dg = k * (k * t).cosh() + k * k * (k * t).sinh();
    let w = g / big_r;
    let dw = dg / big_r - g / (big_r * big_r);
    let d = -big_r * big_r * dw;
    let c = w - d / big_r;
    let exact = d / c;
    assert!((result.a - exact).abs() < 1e-9 * exact.abs(), "{} vs {exact}", result.a);
    let (r0, u0) = result.profile[0];
    assert_eq!(r0, 1.0);
    assert!((u0 - k / c).abs() < 1e-9);
}
