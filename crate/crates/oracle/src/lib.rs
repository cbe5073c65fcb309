//! Independent reference computations used by the test suites.
//!
//! Nothing here shares code with `masskit`: closed forms are written out by
//! hand and the ODE reference uses its own RK4 integrator.

use std::f64::consts::PI;

/// `|S^{k}|` computed from the Gamma-function closed form `2π^{(k+1)/2}/Γ((k+1)/2)`.
pub fn sphere_area(k: usize) -> f64 {
    let a = (k as f64 + 1.0) / 2.0;
    2.0 * PI.powf(a) / gamma_half_integer(a)
}

fn gamma_half_integer(a: f64) -> f64 {
    // Γ(1) = 1, Γ(1/2) = √π, Γ(a+1) = aΓ(a)
    let (mut g, mut x) = if (a - a.floor()).abs() < 1e-12 {
        (1.0, 1.0)
    } else {
        (PI.sqrt(), 0.5)
    };
    while x < a - 1e-12 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Partial mass of `Φ^{4/(n−2)} δ` on the sphere of radius `ρ`:
/// `−½ ρ^{n−1} d/dρ Φ^{4/(n−2)}`.
pub fn conformal_partial_mass(n: usize, rho: f64, phi: f64, dphi: f64) -> f64 {
    let p = 4.0 / (n as f64 - 2.0);
    -0.5 * rho.powi(n as i32 - 1) * p * phi.powf(p - 1.0) * dphi
}

/// Partial mass of Schwarzschild, `m (1 + m/(2ρ^{n−2}))^{(6−n)/(n−2)}`.
pub fn schwarzschild_partial_mass(n: usize, m: f64, rho: f64) -> f64 {
    let nf = n as f64;
    let phi = 1.0 + m / (2.0 * rho.powf(nf - 2.0));
    let dphi = -(nf - 2.0) * m / (2.0 * rho.powf(nf - 1.0));
    conformal_partial_mass(n, rho, phi, dphi)
}

/// Partial mass of `δ + ε x_i x_j r^{−1−n}`: `ε/(2ρ)` in every dimension.
pub fn radial_dyad_partial_mass(epsilon: f64, rho: f64) -> f64 {
    0.5 * epsilon / rho
}

/// Scalar curvature of `φ^{4/(n−2)} δ` for radial `φ` with derivatives
/// `φ'`, `φ''`: `−4(n−1)/(n−2) φ^{−(n+2)/(n−2)} (φ'' + (n−1)φ'/r)`.
pub fn radial_conformal_scalar(n: usize, r: f64, phi: f64, dphi: f64, ddphi: f64) -> f64 {
    let nf = n as f64;
    let lap = ddphi + (nf - 1.0) * dphi / r;
    -4.0 * (nf - 1.0) / (nf - 2.0) * phi.powf(-(nf + 2.0) / (nf - 2.0)) * lap
}

/// Spherically symmetric metric `α(r)² dr² + β(r)² dΩ²` on `r ≥ r_in`.
pub struct RadialModel<'a> {
    pub dim: usize,
    pub r_in: f64,
    pub alpha: &'a dyn Fn(f64) -> f64,
    pub beta: &'a dyn Fn(f64) -> f64,
}

#[derive(Debug, Clone)]
pub struct ShootingResult {
    /// Expansion coefficient `A` of `u = 1 + A r^{2−n} + …`.
    pub a: f64,
    /// `(r, u(r))` on the integration nodes.
    pub profile: Vec<(f64, f64)>,
    /// Value of the unnormalized solution at infinity.
    pub w_infinity: f64,
}

/// Shooting reference for `Δu − f u = 0`, `∂u/∂n = 0` at `r_in`, `u → 1`.
///
/// Integrates `w' = αP/β^{n−1}`, `P' = f w αβ^{n−1}` from `w(r_in) = 1`,
/// `P(r_in) = 0` with classical RK4 up to `r_support`, adds the harmonic tail
/// `P ∫_R^∞ α/β^{n−1}`, and normalizes by `w(∞)`. A cylinder glued at `r_in`
/// carries `u` ≡ const when `f` vanishes there, so it does not enter.
pub fn shoot(model: &RadialModel, f: &dyn Fn(f64) -> f64, r_support: f64, steps: usize) -> ShootingResult {
    let n = model.dim as i32;
    let rhs = |r: f64, w: f64, p: f64| -> (f64, f64) {
        let a = (model.alpha)(r);
        let b = (model.beta)(r);
        (a * p / b.powi(n - 1), f(r) * w * a * b.powi(n - 1))
    };
    let h = (r_support - model.r_in) / steps as f64;
    let (mut w, mut p) = (1.0, 0.0);
    let mut raw = Vec::with_capacity(steps + 1);
    raw.push((model.r_in, w));
    for k in 0..steps {
        let r = model.r_in + k as f64 * h;
        let (k1w, k1p) = rhs(r, w, p);
        let (k2w, k2p) = rhs(r + h / 2.0, w + h / 2.0 * k1w, p + h / 2.0 * k1p);
        let (k3w, k3p) = rhs(r + h / 2.0, w + h / 2.0 * k2w, p + h / 2.0 * k2p);
        let (k4w, k4p) = rhs(r + h, w + h * k3w, p + h * k3p);
        w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        raw.push((r + h, w));
    }
    // tail ∫_R^∞ α/β^{n−1} dr with r = R/s, composite Simpson in s
    let big_r = r_support;
    let m = 20000;
    let mut tail = 0.0;
    for j in 0..=m {
        let s = j as f64 / m as f64;
        // the s → 0 endpoint is the r → ∞ limit, which is 1/R (not 0) when n = 3
        let r = if s == 0.0 { big_r * 1e12 } else { big_r / s };
        let val = (model.alpha)(r) / (model.beta)(r).powi(n - 1) * r * r / big_r;
        let c = if j == 0 || j == m {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        tail += c * val;
    }
    tail *= 1.0 / (3.0 * m as f64);
    let w_infinity = w + p * tail;
    let a = -p / ((model.dim as f64 - 2.0) * w_infinity);
    ShootingResult {
        a,
        profile: raw.iter().map(|(r, w)| (*r, w / w_infinity)).collect(),
        w_infinity,
    }
}

/// Sharp Sobolev constant `n(n−2)/4 · |S^n|^{2/n}` of `ℝⁿ`.
pub fn sharp_sobolev_constant(n: usize) -> f64 {
    let nf = n as f64;
    nf * (nf - 2.0) / 4.0 * sphere_area(n).powf(2.0 / nf)
}

/// Sobolev quotient of the Aubin–Talenti bubble `(1+r²)^{−(n−2)/2}` shifted to
/// vanish at `r = ρ`, on the flat ball of radius `ρ`.
pub fn truncated_bubble_quotient(n: usize, rho: f64) -> f64 {
    let nf = n as f64;
    let e = -(nf - 2.0) / 2.0;
    let edge = (1.0 + rho * rho).powf(e);
    let p = 2.0 * nf / (nf - 2.0);
    let m = 200_000;
    let h = rho / m as f64;
    let (mut grad, mut lp) = (0.0, 0.0);
    for j in 0..=m {
        let r = j as f64 * h;
        let z = (1.0 + r * r).powf(e) - edge;
        let dz = e * 2.0 * r * (1.0 + r * r).powf(e - 1.0);
        let c = if j == 0 || j == m {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        grad += c * dz * dz * r.powi(n as i32 - 1);
        lp += c * z.abs().powf(p) * r.powi(n as i32 - 1);
    }
    grad *= h / 3.0;
    lp *= h / 3.0;
    let area = sphere_area(n - 1);
    area * grad / (area * lp).powf(2.0 / p)
}
