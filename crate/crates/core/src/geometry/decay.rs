use serde::Serialize;

use super::curvature::{default_step, metric_gradient, metric_hessian};
use super::metric::MetricSpec;
use crate::error::{Error, Result};
use crate::quadrature::SphereRule;

/// Measured exponent must not exceed the declared one by more than this.
pub const DECAY_SLACK: f64 = 0.2;

/// Values below this are treated as identically zero.
const ZERO_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Serialize)]
pub struct DecayOrder {
    pub label: &'static str,
    pub declared: f64,
    /// Least-squares slope of `log max|·|` against `log r`; `None` when the
    /// quantity vanishes on the whole ladder.
    pub measured: Option<f64>,
    /// Best constant `C = max_r |·| r^{-declared}` on the ladder.
    pub constant: f64,
    pub samples: Vec<f64>,
    pub violated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub radii: Vec<f64>,
    pub orders: Vec<DecayOrder>,
}

impl DecayReport {
    pub fn passed(&self) -> bool {
        self.orders.iter().all(|o| !o.violated)
    }
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Measures the decay of `h = g − δ` and its first two derivatives.
///
/// On each rung the maximum over a coarse sphere rule is taken; the slopes of
/// `log max|h|`, `log max|∂h|`, `log max|∂∂h|` in `log r` are compared with the
/// declared budget.
pub fn decay_audit(metric: &MetricSpec, radii: &[f64]) -> Result<DecayReport> {
    if radii.len() < 4 {
        return Err(Error::config(format!(
            "decay audit needs a ladder of at least 4 radii, got {}",
            radii.len()
        )));
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::config("decay ladder must be strictly increasing"));
    }
    let n = metric.dim();
    let rule = SphereRule::new(n, if n == 3 { 16 } else { 8 });
    let identity = nalgebra::DMatrix::<f64>::identity(n, n);

    let mut maxima = [Vec::new(), Vec::new(), Vec::new()];
    for &r in radii {
        let h = default_step(r);
        let mut m = [0.0_f64; 3];
        for (p, _) in rule.nodes() {
            let x: Vec<f64> = p.iter().map(|c| c * r).collect();
            let g = metric.components(&x);
            m[0] = m[0].max((g - &identity).norm());
            let dg = metric_gradient(metric, &x, h);
            m[1] = m[1].max(dg.iter().map(|d| d.norm_squared()).sum::<f64>().sqrt());
            let ddg = metric_hessian(metric, &x, h);
            m[2] = m[2].max(ddg.iter().map(|d| d.norm_squared()).sum::<f64>().sqrt());
        }
        for k in 0..3 {
            maxima[k].push(m[k]);
        }
    }

    let budget = metric.decay();
    let declared = [budget.h, budget.dh, budget.ddh];
    let labels = ["|h|", "|dh|", "|ddh|"];
    let log_r: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let orders = (0..3)
        .map(|k| {
            let samples = maxima[k].clone();
            let constant = samples
                .iter()
                .zip(radii)
                .map(|(v, r)| v * r.powf(-declared[k]))
                .fold(0.0, f64::max);
            let measured = if samples.iter().all(|v| *v > ZERO_FLOOR) {
                let logs: Vec<f64> = samples.iter().map(|v| v.ln()).collect();
                Some(slope(&log_r, &logs))
            } else {
                None
            };
            let violated = measured.is_some_and(|p| p > declared[k] + DECAY_SLACK);
            DecayOrder {
                label: labels[k],
                declared: declared[k],
                measured,
                constant,
                samples,
                violated,
            }
        })
        .collect();
    Ok(DecayReport {
        radii: radii.to_vec(),
        orders,
    })
}
