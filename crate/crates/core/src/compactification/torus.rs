use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::lohkamp::{CURVATURE_FLOOR, POSITIVE_WITNESS};
use crate::error::{Error, Result};
use crate::geometry::{metric_gradient, metric_hessian, radius, MetricSpec};

/// Cube `[−L/2, L/2]ⁿ` centred at the origin of the end chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TorusGlueSpec {
    pub side: f64,
    /// Depth of the collar of `∂𝒞` that must carry a constant metric.
    pub collar: f64,
    /// Nodes per axis of the graded curvature sampling grid.
    pub sample_grid: usize,
    /// Nodes per axis of the emitted chart.
    pub chart_grid: usize,
    /// Chart points closer to the origin than this belong to the interior
    /// piece and are not sampled.
    pub excision_radius: f64,
}

impl TorusGlueSpec {
    /// Side `16 r_flat` with a collar of one eighth of the side.
    pub fn around(r_flat: f64, excision_radius: f64) -> Self {
        let side = 16.0 * r_flat;
        Self {
            side,
            collar: side / 8.0,
            sample_grid: 33,
            chart_grid: 9,
            excision_radius,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TorusHeader {
    pub dimension: usize,
    pub side: f64,
    pub collar: f64,
    pub grid_shape: Vec<usize>,
    pub excision_radius: f64,
    pub columns: Vec<String>,
    pub rows: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TorusChart {
    pub header: TorusHeader,
    pub collar_samples: usize,
    /// Largest face-to-face difference of `g`, `∂g`, `∂²g` (zero when exact).
    pub periodicity_defect: f64,
    pub min_scalar: f64,
    pub min_scalar_at: Vec<f64>,
    pub max_scalar: f64,
    pub max_scalar_at: Vec<f64>,
    pub curvature_samples: usize,
    pub nonnegative: bool,
    pub positive_somewhere: bool,
    #[serde(skip)]
    pub csv: String,
}

impl TorusChart {
    pub fn passed(&self) -> bool {
        self.periodicity_defect == 0.0 && self.nonnegative && self.positive_somewhere
    }

    /// JSON header on the first line, then the CSV block.
    pub fn render(&self) -> String {
        let header = serde_json::to_string(&self.header).expect("torus header serializes");
        format!("{header}\n{}", self.csv)
    }
}

/// Enumerates the tensor grid `nodes^dim`, last axis fastest.
fn tensor_points(nodes: &[f64], dim: usize) -> Vec<Vec<f64>> {
    let m = nodes.len();
    let total = m.pow(dim as u32);
    (0..total)
        .map(|mut idx| {
            let mut x = vec![0.0; dim];
            for k in (0..dim).rev() {
                x[k] = nodes[idx % m];
                idx /= m;
            }
            x
        })
        .collect()
}

fn uniform(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let count = count.max(2);
    (0..count)
        .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
        .collect()
}

fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

/// Identifies opposite faces of the cube and audits the resulting periodic chart.
///
/// The metric must be exactly constant on the collar; otherwise a gluing
/// error names the first offending point. `scalar` evaluates `R(g)`.
pub fn torus_glue(
    metric: &MetricSpec,
    scalar: &(dyn Fn(&[f64]) -> Result<f64> + Sync),
    spec: &TorusGlueSpec,
) -> Result<TorusChart> {
    let n = metric.dim();
    let half = 0.5 * spec.side;
    if !(spec.collar > 0.0 && spec.collar < half) {
        return Err(Error::config("collar must lie in (0, side/2)"));
    }
    if !(spec.excision_radius >= metric.inner_radius()) || spec.excision_radius >= half - spec.collar {
        return Err(Error::config(
            "excision radius must cover the chart hole and stay inside the collar",
        ));
    }

    // collar constancy: faces and two inner layers, on a grid over each face
    let face_nodes = uniform(-half, half, 9);
    let face_grid = tensor_points(&face_nodes, n - 1);
    let corner = vec![half; n];
    let reference = metric.components(&corner);
    let mut collar_samples = 0;
    for k in 0..n {
        for sign in [-1.0, 1.0] {
            for depth in [0.0, 0.5 * spec.collar, spec.collar] {
                for y in &face_grid {
                    let mut x = Vec::with_capacity(n);
                    x.extend_from_slice(&y[..k]);
                    x.push(sign * (half - depth));
                    x.extend_from_slice(&y[k..]);
                    let g = metric.components(&x);
                    if g != reference {
                        return Err(Error::Audit {
                            check: "metric constant on the collar of the cube".into(),
                            location: format!("{x:?}"),
                            value: max_diff(&g, &reference),
                            bound: 0.0,
                        });
                    }
                    collar_samples += 1;
                }
            }
        }
    }

    // face-to-face agreement of g and its first two difference quotients
    let h = 0.25 * spec.collar;
    let mut periodicity_defect: f64 = 0.0;
    for k in 0..n {
        for y in &face_grid {
            let mut lo = Vec::with_capacity(n);
            lo.extend_from_slice(&y[..k]);
            lo.push(-half);
            lo.extend_from_slice(&y[k..]);
            let mut hi = lo.clone();
            hi[k] = half;
            periodicity_defect = periodicity_defect.max(max_diff(&metric.components(&lo), &metric.components(&hi)));
            for (a, b) in metric_gradient(metric, &lo, h).iter().zip(metric_gradient(metric, &hi, h).iter()) {
                periodicity_defect = periodicity_defect.max(max_diff(a, b));
            }
            for (a, b) in metric_hessian(metric, &lo, h).iter().zip(metric_hessian(metric, &hi, h).iter()) {
                periodicity_defect = periodicity_defect.max(max_diff(a, b));
            }
        }
    }

    // curvature on the fundamental domain, graded towards the origin
    let m = spec.sample_grid.max(3);
    let nodes: Vec<f64> = uniform(-1.0, 1.0, m)
        .into_iter()
        .map(|t| half * t * t.abs())
        .collect();
    let points: Vec<Vec<f64>> = tensor_points(&nodes, n)
        .into_iter()
        .filter(|x| radius(x) >= spec.excision_radius)
        .collect();
    let scalars = points.par_iter().map(|x| scalar(x)).collect::<Result<Vec<f64>>>()?;
    let (mut imin, mut imax) = (0, 0);
    for (i, r) in scalars.iter().enumerate() {
        if *r < scalars[imin] {
            imin = i;
        }
        if *r > scalars[imax] {
            imax = i;
        }
    }

    // chart block
    let chart_nodes = uniform(-half, half, spec.chart_grid);
    let mut columns: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    for i in 0..n {
        for j in i..n {
            columns.push(format!("g{i}{j}"));
        }
    }
    columns.push("scalar_curvature".into());
    let chart_points: Vec<Vec<f64>> = tensor_points(&chart_nodes, n)
        .into_iter()
        .filter(|x| radius(x) >= spec.excision_radius)
        .collect();
    let rows = chart_points
        .par_iter()
        .map(|x| {
            let g = metric.components(x);
            let mut fields: Vec<String> = x.iter().map(|v| format!("{v:.12e}")).collect();
            for i in 0..n {
                for j in i..n {
                    fields.push(format!("{:.12e}", g[(i, j)]));
                }
            }
            fields.push(format!("{:.12e}", scalar(x)?));
            Ok(fields.join(","))
        })
        .collect::<Result<Vec<String>>>()?;
    let mut csv = columns.join(",");
    csv.push('\n');
    for row in &rows {
        csv.push_str(row);
        csv.push('\n');
    }

    Ok(TorusChart {
        header: TorusHeader {
            dimension: n,
            side: spec.side,
            collar: spec.collar,
            grid_shape: vec![spec.chart_grid.max(2); n],
            excision_radius: spec.excision_radius,
            columns,
            rows: rows.len(),
        },
        collar_samples,
        periodicity_defect,
        min_scalar: scalars[imin],
        min_scalar_at: points[imin].clone(),
        max_scalar: scalars[imax],
        max_scalar_at: points[imax].clone(),
        curvature_samples: points.len(),
        nonnegative: scalars[imin] >= CURVATURE_FLOOR,
        positive_somewhere: scalars[imax] > POSITIVE_WITNESS,
        csv,
    })
}
