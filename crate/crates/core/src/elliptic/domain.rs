use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MetricSpec;
use crate::quadrature::gauss_legendre_on;

/// Finite cylinder `[−L, 0] × S^{n−1}` glued to the end at the inner sphere;
/// it stands in for an arbitrary end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyEnd {
    /// Length `L₀` of the cylinder piece inside `U`.
    pub base_length: f64,
    /// Number of exhaustion levels `i = 0, 1, …` with `L_i = 2^i L₀`.
    pub levels: usize,
}

/// End annulus plus optional toy end, with the exhaustion schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainModel {
    pub dim: usize,
    /// Radius of the inner sphere where the toy end is attached.
    #[serde(default = "default_inner")]
    pub inner_radius: f64,
    /// First truncation radius `R₀`; later radii double.
    pub outer_radius: f64,
    #[serde(default = "default_ppd")]
    pub points_per_decade: usize,
    #[serde(default)]
    pub toy_end: Option<ToyEnd>,
    /// Maximum number of truncation-radius doublings per level.
    #[serde(default = "default_doublings")]
    pub radius_doublings: usize,
    /// Stopping tolerance on the change of `u` over `U`.
    #[serde(default = "default_exhaustion_tol")]
    pub exhaustion_tol: f64,
}

fn default_inner() -> f64 {
    1.0
}
fn default_ppd() -> usize {
    1000
}
fn default_doublings() -> usize {
    4
}
fn default_exhaustion_tol() -> f64 {
    1e-8
}

impl DomainModel {
    pub fn new(dim: usize, outer_radius: f64) -> Self {
        Self {
            dim,
            inner_radius: 1.0,
            outer_radius,
            points_per_decade: default_ppd(),
            toy_end: None,
            radius_doublings: default_doublings(),
            exhaustion_tol: default_exhaustion_tol(),
        }
    }

    pub fn with_toy_end(mut self, base_length: f64, levels: usize) -> Self {
        self.toy_end = Some(ToyEnd {
            base_length,
            levels,
        });
        self
    }

    pub fn with_points_per_decade(mut self, ppd: usize) -> Self {
        self.points_per_decade = ppd;
        self
    }

    pub fn with_inner_radius(mut self, r: f64) -> Self {
        self.inner_radius = r;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 3 {
            return Err(Error::config(format!("dimension must be >= 3, got {}", self.dim)));
        }
        if !(self.inner_radius > 0.0 && self.outer_radius > 2.0 * self.inner_radius) {
            return Err(Error::config(
                "domain needs 0 < inner_radius and outer_radius > 2 inner_radius",
            ));
        }
        if self.points_per_decade < 20 {
            return Err(Error::config("points_per_decade must be at least 20"));
        }
        if let Some(t) = self.toy_end {
            if !(t.base_length > 0.0) {
                return Err(Error::config("toy end base_length must be positive"));
            }
        }
        if !(self.exhaustion_tol > 0.0) {
            return Err(Error::config("exhaustion_tol must be positive"));
        }
        Ok(())
    }

    /// Cylinder length `L_i = 2^i L₀` (0 without a toy end).
    pub fn cylinder_length(&self, level: usize) -> f64 {
        self.toy_end
            .map(|t| t.base_length * 2f64.powi(level as i32))
            .unwrap_or(0.0)
    }

    pub fn levels(&self) -> usize {
        self.toy_end.map(|t| t.levels.max(1)).unwrap_or(1)
    }

    /// Logarithmic step; an integer number of steps spans each doubling.
    pub fn log_step(&self) -> f64 {
        let per_doubling = (self.points_per_decade as f64 * 2f64.log10()).ceil();
        2f64.ln() / per_doubling
    }

    /// `R_j` rounded up to the log-mesh so that doubling adds whole steps.
    pub fn truncation_radius(&self, doubling: usize) -> f64 {
        let step = self.log_step();
        let k = ((self.outer_radius / self.inner_radius).ln() / step - 1e-9).ceil();
        self.inner_radius * (k * step).exp() * 2f64.powi(doubling as i32)
    }
}

/// `α = sqrt(g_rr)` and areal radius `β` along the model's radial coordinate.
///
/// The coordinate `t` is `r − r_in` on the end and the cylinder coordinate
/// `ξ ≤ 0` on the toy end, where both coefficients are frozen at `r_in`.
#[derive(Debug, Clone)]
pub struct RadialCoefficients {
    pub dim: usize,
    metric: MetricSpec,
    r_in: f64,
    alpha_in: f64,
    beta_in: f64,
}

impl RadialCoefficients {
    pub fn new(metric: &MetricSpec, r_in: f64) -> Result<Self> {
        let c = metric.radial_components(r_in).ok_or_else(|| {
            Error::config("the radial tier requires a spherically symmetric metric")
        })?;
        if !(c.g_rr() > 0.0 && c.iso > 0.0) {
            return Err(Error::Degenerate {
                point: vec![r_in],
                detail: "radial metric components are not positive".into(),
            });
        }
        Ok(Self {
            dim: metric.dim(),
            metric: metric.clone(),
            r_in,
            alpha_in: c.g_rr().sqrt(),
            beta_in: c.areal_radius(r_in),
        })
    }

    pub fn metric(&self) -> &MetricSpec {
        &self.metric
    }

    pub fn inner_radius(&self) -> f64 {
        self.r_in
    }

    /// `(α, β)` at radius `r` on the end.
    pub fn at_radius(&self, r: f64) -> (f64, f64) {
        let c = self
            .metric
            .radial_components(r)
            .expect("spherical symmetry checked at construction");
        (c.g_rr().sqrt(), c.areal_radius(r))
    }

    pub fn at(&self, t: f64) -> (f64, f64) {
        if t < 0.0 {
            (self.alpha_in, self.beta_in)
        } else {
            self.at_radius(self.r_in + t)
        }
    }

    /// Volume density `α β^{n−1}` (per unit sphere area).
    pub fn volume_density(&self, t: f64) -> f64 {
        let (a, b) = self.at(t);
        a * b.powi(self.dim as i32 - 1)
    }

    /// Conductance density `β^{n−1}/α`.
    pub fn conductance(&self, t: f64) -> f64 {
        let (a, b) = self.at(t);
        b.powi(self.dim as i32 - 1) / a
    }

    /// `T(R) = ∫_R^∞ α/β^{n−1} dr`, the radial Green tail.
    pub fn tail(&self, r: f64) -> f64 {
        // substitute ρ = r/s, s ∈ (0, 1]
        let (s, w) = gauss_legendre_on(48, 0.0, 1.0);
        s.iter()
            .zip(&w)
            .map(|(s, w)| {
                let rho = r / s;
                let (a, b) = self.at_radius(rho);
                w * a / b.powi(self.dim as i32 - 1) * r / (s * s)
            })
            .sum()
    }

    /// `∫_a^b g(t) dt` with 4-point Gauss–Legendre.
    pub(crate) fn integrate(a: f64, b: f64, g: impl Fn(f64) -> f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let (t, w) = gauss_legendre_on(4, a, b);
        t.iter().zip(&w).map(|(t, w)| w * g(*t)).sum()
    }
}

/// Nodes of the one-dimensional model of `U_{i,R}`.
#[derive(Debug, Clone, Serialize)]
pub struct RadialMesh {
    pub t: Vec<f64>,
    /// Index of the node on `∂U` (the cylinder cut at `−L₀`, or the inner sphere).
    pub boundary_of_u: usize,
    /// Index of the node at the inner sphere `t = 0`.
    pub first_end: usize,
    pub inner_radius: f64,
    pub outer_radius: f64,
}

impl RadialMesh {
    pub fn build(domain: &DomainModel, level: usize, doubling: usize) -> Self {
        let step = domain.log_step();
        let r_in = domain.inner_radius;
        let r_out = domain.truncation_radius(doubling);
        let k_end = ((r_out / r_in).ln() / step).round() as usize;
        let mut t = Vec::new();
        let mut boundary_of_u = 0;
        if let Some(toy) = domain.toy_end {
            let h = r_in * (step.exp() - 1.0);
            let cells_per_base = (toy.base_length / h).ceil().max(1.0) as usize;
            let dh = toy.base_length / cells_per_base as f64;
            let total = domain.cylinder_length(level);
            let cells = ((total / dh).round() as usize).max(cells_per_base);
            for j in 0..cells {
                t.push(-((cells - j) as f64) * dh);
            }
            boundary_of_u = cells - cells_per_base;
        }
        let first_end = t.len();
        for k in 0..=k_end {
            let r = if k == k_end {
                r_out
            } else {
                r_in * (k as f64 * step).exp()
            };
            t.push(r - r_in);
        }
        Self {
            t,
            boundary_of_u,
            first_end,
            inner_radius: r_in,
            outer_radius: r_out,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Radius of node `k`, `None` on the toy end.
    pub fn radius(&self, k: usize) -> Option<f64> {
        (k >= self.first_end).then(|| self.inner_radius + self.t[k])
    }

    /// Control-volume bounds of node `k`.
    pub fn cell(&self, k: usize) -> (f64, f64) {
        let lo = if k == 0 {
            self.t[0]
        } else {
            0.5 * (self.t[k - 1] + self.t[k])
        };
        let hi = if k + 1 == self.len() {
            self.t[k]
        } else {
            0.5 * (self.t[k] + self.t[k + 1])
        };
        (lo, hi)
    }
}
