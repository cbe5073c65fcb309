//! Quintic smoothstep cutoffs used by the interpolation and the potentials.

/// `6x⁵ − 15x⁴ + 10x³` clamped to `[0, 1]`, with first and second derivatives.
pub fn smoothstep(x: f64) -> (f64, f64, f64) {
    if x <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if x >= 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        let x2 = x * x;
        let x3 = x2 * x;
        (
            x3 * (10.0 + x * (-15.0 + 6.0 * x)),
            30.0 * x2 * (1.0 - x) * (1.0 - x),
            60.0 * x * (1.0 - x) * (1.0 - 2.0 * x),
        )
    }
}

/// `ζ`: 0 on `(−∞, 2]`, 1 on `[3, ∞)`.
pub fn zeta(t: f64) -> f64 {
    smoothstep(t - 2.0).0
}

/// `η`: 1 on `[2, 3]`, 0 outside `[1, 4]`.
pub fn eta(t: f64) -> f64 {
    if t <= 2.0 {
        smoothstep(t - 1.0).0
    } else {
        smoothstep(4.0 - t).0
    }
}

/// Derivatives `(ζ', ζ'')` in `t`.
pub fn zeta_derivatives(t: f64) -> (f64, f64) {
    let (_, d1, d2) = smoothstep(t - 2.0);
    (d1, d2)
}

/// Derivatives `(η', η'')` in `t`.
pub fn eta_derivatives(t: f64) -> (f64, f64) {
    if t <= 2.0 {
        let (_, d1, d2) = smoothstep(t - 1.0);
        (d1, d2)
    } else {
        let (_, d1, d2) = smoothstep(4.0 - t);
        (-d1, d2)
    }
}

/// `η(r/s)`.
pub fn eta_scaled(r: f64, s: f64) -> f64 {
    eta(r / s)
}

/// `ζ(r/s)`.
pub fn zeta_scaled(r: f64, s: f64) -> f64 {
    zeta(r / s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateaus_are_exact() {
        for t in [-1.0, 0.0, 1.5, 2.0] {
            assert_eq!(zeta(t), 0.0);
        }
        for t in [3.0, 3.5, 10.0] {
            assert_eq!(zeta(t), 1.0);
        }
        for t in [2.0, 2.5, 3.0] {
            assert_eq!(eta(t), 1.0);
        }
        for t in [0.0, 1.0, 4.0, 7.0] {
            assert_eq!(eta(t), 0.0);
        }
    }

    #[test]
    fn derivatives_match_differences() {
        let h = 1e-5;
        for t in [2.1, 2.5, 2.9] {
            let (d1, d2) = zeta_derivatives(t);
            assert!((d1 - (zeta(t + h) - zeta(t - h)) / (2.0 * h)).abs() < 1e-8);
            let fd2 = (zeta(t + h) - 2.0 * zeta(t) + zeta(t - h)) / (h * h);
            assert!((d2 - fd2).abs() < 1e-4);
        }
        for t in [1.3, 3.7] {
            let (d1, _) = eta_derivatives(t);
            assert!((d1 - (eta(t + h) - eta(t - h)) / (2.0 * h)).abs() < 1e-8);
        }
    }
}
