//! Gauss–Legendre rules and product quadrature on coordinate spheres.

use std::f64::consts::PI;

/// Nodes and weights of the `m`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1, "Gauss–Legendre rule needs at least one node");
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_m
        let mut x = (PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(m: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(m);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|v| v * half).collect(),
    )
}

/// Area `|S^{n-1}|` of the unit sphere in `ℝⁿ`.
pub fn unit_sphere_area(n: usize) -> f64 {
    assert!(n >= 1);
    // |S^0| = 2, |S^1| = 2π, |S^k| = 2π/(k-1) |S^{k-2}|
    let k = n - 1;
    let mut area = if k % 2 == 0 { 2.0 } else { 2.0 * PI };
    let mut j = if k % 2 == 0 { 2 } else { 3 };
    while j <= k {
        area *= 2.0 * PI / (j as f64 - 1.0);
        j += 2;
    }
    area
}

/// Product quadrature on the unit sphere `S^{n-1} ⊂ ℝⁿ`.
///
/// `S¹` uses the trapezoid rule in longitude, `S²` adds Gauss–Legendre in
/// `cos θ`, and higher spheres recurse with Gauss–Legendre in the polar angle
/// weighted by `sin^{k-1} θ`. No node sits on a pole.
#[derive(Debug, Clone)]
pub struct SphereRule {
    dim: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl SphereRule {
    /// `order` is the number of longitude nodes; polar directions use `order / 2`.
    pub fn new(dim: usize, order: usize) -> Self {
        assert!(dim >= 2, "sphere rule needs n >= 2");
        let order = order.max(4);
        let (points, weights) = Self::build(dim, order);
        Self {
            dim,
            points,
            weights,
        }
    }

    fn build(dim: usize, order: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        if dim == 2 {
            let w = 2.0 * PI / order as f64;
            let pts = (0..order)
                .map(|k| {
                    let phi = 2.0 * PI * (k as f64 + 0.5) / order as f64;
                    vec![phi.cos(), phi.sin()]
                })
                .collect();
            return (pts, vec![w; order]);
        }
        let (sub_pts, sub_w) = Self::build(dim - 1, order);
        let polar = (order / 2).max(2);
        // In t = cos θ the polar weight is (1 − t²)^{(dim−3)/2}.
        let k = dim - 2;
        let (t_nodes, t_weights): (Vec<f64>, Vec<f64>) = if k % 2 == 1 {
            let m = (k - 1) / 2;
            let (t, w) = gauss_legendre(polar + m);
            let w = t
                .iter()
                .zip(&w)
                .map(|(t, w)| w * (1.0 - t * t).powi(m as i32))
                .collect();
            (t, w)
        } else {
            // Gauss–Chebyshev absorbs the (1 − t²)^{-1/2} factor
            let m = k / 2;
            let count = polar + m;
            let t: Vec<f64> = (0..count)
                .map(|j| (PI * (2 * j + 1) as f64 / (2 * count) as f64).cos())
                .collect();
            let w = t
                .iter()
                .map(|t| PI / count as f64 * (1.0 - t * t).powi(m as i32))
                .collect();
            (t, w)
        };
        let mut pts = Vec::with_capacity(t_nodes.len() * sub_pts.len());
        let mut weights = Vec::with_capacity(pts.capacity());
        for (t, tw) in t_nodes.iter().zip(&t_weights) {
            let s = (1.0 - t * t).max(0.0).sqrt();
            for (p, pw) in sub_pts.iter().zip(&sub_w) {
                let mut x = Vec::with_capacity(dim);
                x.extend(p.iter().map(|c| c * s));
                x.push(*t);
                pts.push(x);
                weights.push(tw * pw);
            }
        }
        (pts, weights)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.points.iter().map(|p| p.as_slice()).zip(self.weights.iter().copied())
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// ∫_{S^{n-1}} f dΩ with fixed summation order.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.nodes().map(|(x, w)| w * f(x)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(6);
        // degree 11 is the highest exact degree
        let exact = 2.0 / 11.0;
        let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((got - exact).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_areas() {
        assert!((unit_sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((unit_sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
        for n in 2..=7 {
            let rule = SphereRule::new(n, 12);
            let total: f64 = rule.weights().iter().sum();
            assert!(
                (total - unit_sphere_area(n)).abs() < 1e-10 * total,
                "n = {n}: {total}"
            );
        }
    }

    #[test]
    fn sphere_rule_second_moments() {
        // ∫ x_i² dΩ = |S^{n-1}| / n
        for n in 3..=5 {
            let rule = SphereRule::new(n, 16);
            for i in 0..n {
                let m = rule.integrate(|x| x[i] * x[i]);
                assert!((m - unit_sphere_area(n) / n as f64).abs() < 1e-10);
            }
            assert!(rule.points().iter().all(|p| (p.iter().map(|c| c * c).sum::<f64>() - 1.0).abs() < 1e-13));
        }
    }
}
