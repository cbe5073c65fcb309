//! Symmetric tridiagonal systems.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix with diagonal `diag` and off-diagonal `off`.
#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.off[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// `self − μ other`.
    pub fn shifted(&self, mu: f64, other: &SymTridiag) -> SymTridiag {
        SymTridiag {
            diag: self.diag.iter().zip(&other.diag).map(|(a, b)| a - mu * b).collect(),
            off: self.off.iter().zip(&other.off).map(|(a, b)| a - mu * b).collect(),
        }
    }

    /// Pivots of the `LDLᵀ` factorization; `None` if a pivot vanishes.
    fn pivots(&self) -> Option<Vec<f64>> {
        let n = self.len();
        let mut d = Vec::with_capacity(n);
        for i in 0..n {
            let mut p = self.diag[i];
            if i > 0 {
                p -= self.off[i - 1] * self.off[i - 1] / d[i - 1];
            }
            if p == 0.0 || !p.is_finite() {
                return None;
            }
            d.push(p);
        }
        Some(d)
    }

    /// Number of negative eigenvalues (Sylvester inertia of the `LDLᵀ` pivots).
    pub fn negative_count(&self) -> Option<usize> {
        self.pivots().map(|d| d.iter().filter(|p| **p < 0.0).count())
    }

    /// Lower Gershgorin bound on the spectrum.
    pub fn gershgorin_lower(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut r = 0.0;
                if i > 0 {
                    r += self.off[i - 1].abs();
                }
                if i + 1 < n {
                    r += self.off[i].abs();
                }
                self.diag[i] - r
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn factor_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        let d = self
            .pivots()
            .ok_or_else(|| Error::Solver("zero pivot in tridiagonal factorization".into()))?;
        let mut y = b.to_vec();
        for i in 1..n {
            y[i] -= self.off[i - 1] / d[i - 1] * y[i - 1];
        }
        for i in 0..n {
            y[i] /= d[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            y[i] -= self.off[i] / d[i] * y[i + 1];
        }
        Ok(y)
    }

    /// Direct solve with one step of iterative refinement. The relative
    /// residual `‖Ax − b‖∞ / (‖A‖∞‖x‖∞ + ‖b‖∞)` must not exceed `tol`.
    pub fn solve(&self, b: &[f64], tol: f64) -> Result<(Vec<f64>, f64)> {
        if self.is_empty() {
            return Ok((Vec::new(), 0.0));
        }
        let mut x = self.factor_solve(b)?;
        let r: Vec<f64> = self.apply(&x).iter().zip(b).map(|(ax, b)| b - ax).collect();
        let dx = self.factor_solve(&r)?;
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        let residual = self.relative_residual(&x, b);
        if !(residual <= tol) {
            return Err(Error::Solver(format!(
                "relative residual {residual:.3e} exceeds tolerance {tol:.1e}"
            )));
        }
        Ok((x, residual))
    }

    pub fn relative_residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let ax = self.apply(x);
        let res = ax.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let n = self.len();
        let norm_a = (0..n)
            .map(|i| {
                self.diag[i].abs()
                    + if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                    + if i + 1 < n { self.off[i].abs() } else { 0.0 }
            })
            .fold(0.0, f64::max);
        let xn = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let bn = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let denom = norm_a * xn + bn;
        if denom == 0.0 {
            0.0
        } else {
            res / denom
        }
    }
}
