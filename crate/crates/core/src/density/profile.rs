use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::{default_step, scalar_curvature_bartnik, MetricSpec};

/// Samples of a radial function on a uniform grid, read back by cubic
/// Hermite interpolation with centred slopes.
#[derive(Debug, Clone)]
pub struct RadialTable {
    pub lo: f64,
    pub hi: f64,
    pub values: Vec<f64>,
}

impl RadialTable {
    pub fn sample(lo: f64, hi: f64, points: usize, f: impl Fn(f64) -> Result<f64> + Sync) -> Result<Self> {
        let points = points.max(4);
        let values = (0..points)
            .into_par_iter()
            .map(|k| f(lo + (hi - lo) * k as f64 / (points - 1) as f64))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self { lo, hi, values })
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.values.len() - 1) as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        self.lo + self.spacing() * k as f64
    }

    fn slope(&self, k: usize) -> f64 {
        let n = self.values.len();
        let a = k.saturating_sub(1);
        let b = (k + 1).min(n - 1);
        (self.values[b] - self.values[a]) / ((b - a) as f64 * self.spacing())
    }

    /// Interpolated value; constant extension outside `[lo, hi]`.
    pub fn eval(&self, r: f64) -> f64 {
        let n = self.values.len();
        if r <= self.lo {
            return self.values[0];
        }
        if r >= self.hi {
            return self.values[n - 1];
        }
        let h = self.spacing();
        let x = (r - self.lo) / h;
        let k = (x.floor() as usize).min(n - 2);
        let s = x - k as f64;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.values[k]
            + (s3 - 2.0 * s2 + s) * h * self.slope(k)
            + (-2.0 * s3 + 3.0 * s2) * self.values[k + 1]
            + (s3 - s2) * h * self.slope(k + 1)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

fn axis_point(dim: usize, r: f64) -> Vec<f64> {
    let mut x = vec![0.0; dim];
    x[0] = r;
    x
}

/// Bartnik scalar curvature of a spherically symmetric metric at `(r, 0, …)`.
///
/// With `richardson` the default step is combined with its half,
/// `(4R(h/2) − R(h))/3`, removing the leading truncation term.
pub fn radial_scalar_curvature(metric: &MetricSpec, r: f64, richardson: bool) -> Result<f64> {
    let x = axis_point(metric.dim(), r);
    let h = default_step(r);
    let coarse = scalar_curvature_bartnik(metric, &x, h)?;
    if !richardson {
        return Ok(coarse);
    }
    let fine = scalar_curvature_bartnik(metric, &x, h / 2.0)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Table of `R(g)` on `[lo, hi]` at the given spacing.
pub fn scalar_curvature_table(metric: &MetricSpec, lo: f64, hi: f64, spacing: f64, richardson: bool) -> Result<RadialTable> {
    let points = ((hi - lo) / spacing).ceil() as usize + 1;
    RadialTable::sample(lo, hi, points, |r| radial_scalar_curvature(metric, r, richardson))
}
