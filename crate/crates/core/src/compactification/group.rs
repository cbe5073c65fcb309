use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::adm::{adm_mass, MassReport};
use crate::error::{Error, Result};
use crate::geometry::{pullback, MetricSpec};
use crate::quadrature::SphereRule;

/// Tolerance for orthogonality, closure, invariance and fixed points.
pub const GROUP_TOLERANCE: f64 = 1e-12;
const MAX_ORDER: usize = 10_000;

fn same(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    (a - b).amax() <= GROUP_TOLERANCE
}

/// Finite subgroup of `O(n)` generated by the given matrices.
#[derive(Debug, Clone, Serialize)]
pub struct GroupAction {
    pub dim: usize,
    pub generators: Vec<DMatrix<f64>>,
    pub elements: Vec<DMatrix<f64>>,
}

impl GroupAction {
    /// Generates the group and checks orthogonality, closure and freeness.
    pub fn new(dim: usize, generators: Vec<DMatrix<f64>>) -> Result<Self> {
        let id = DMatrix::<f64>::identity(dim, dim);
        for (i, g) in generators.iter().enumerate() {
            if g.nrows() != dim || g.ncols() != dim {
                return Err(Error::config(format!("generator {i} is not {dim}x{dim}")));
            }
            let defect = (g.transpose() * g - &id).amax();
            if defect > GROUP_TOLERANCE {
                return Err(Error::Precondition {
                    inequality: format!("|TᵀT − I| ≤ {GROUP_TOLERANCE:e} for generator {i}"),
                    lhs: defect,
                    rhs: GROUP_TOLERANCE,
                    anchor: "finite group Γ ⊂ O(n)".into(),
                });
            }
        }
        let mut elements = vec![id.clone()];
        let mut frontier = vec![id];
        while let Some(a) = frontier.pop() {
            for g in &generators {
                let p = g * &a;
                if !elements.iter().any(|e| same(e, &p)) {
                    if elements.len() >= MAX_ORDER {
                        return Err(Error::config(format!(
                            "generators do not close into a group of order <= {MAX_ORDER}"
                        )));
                    }
                    elements.push(p.clone());
                    frontier.push(p);
                }
            }
        }
        let group = Self {
            dim,
            generators,
            elements,
        };
        let closure = group.closure_defect();
        if closure > GROUP_TOLERANCE {
            return Err(Error::Precondition {
                inequality: "group closed under composition".into(),
                lhs: closure,
                rhs: GROUP_TOLERANCE,
                anchor: "finite group Γ ⊂ O(n)".into(),
            });
        }
        let (margin, worst) = group.freeness_margin();
        if margin <= 1e-9 {
            return Err(Error::Precondition {
                inequality: format!("element {worst} has no fixed direction (σ_min(T − I) > 0)"),
                lhs: margin,
                rhs: 1e-9,
                anchor: "acting freely on ℝⁿ − {0}".into(),
            });
        }
        Ok(group)
    }

    pub fn trivial(dim: usize) -> Self {
        Self::new(dim, vec![]).expect("trivial group is valid")
    }

    /// `{±I}`.
    pub fn antipodal(dim: usize) -> Self {
        Self::new(dim, vec![-DMatrix::<f64>::identity(dim, dim)]).expect("antipodal group is valid")
    }

    /// Builds generators from row-major entries.
    pub fn from_row_major(dim: usize, generators: &[Vec<f64>]) -> Result<Self> {
        let mats = generators
            .iter()
            .enumerate()
            .map(|(i, g)| {
                if g.len() != dim * dim {
                    Err(Error::config(format!(
                        "generator {i} has {} entries, expected {}",
                        g.len(),
                        dim * dim
                    )))
                } else {
                    Ok(DMatrix::from_row_slice(dim, dim, g))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, mats)
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    /// Largest distance from a product of two elements to the element list.
    pub fn closure_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in &self.elements {
            for b in &self.elements {
                let p = a * b;
                let d = self
                    .elements
                    .iter()
                    .map(|e| (e - &p).amax())
                    .fold(f64::INFINITY, f64::min);
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Smallest singular value of `T − I` over non-identity elements, with
    /// the index attaining it. Infinite for the trivial group.
    pub fn freeness_margin(&self) -> (f64, usize) {
        let id = DMatrix::<f64>::identity(self.dim, self.dim);
        let mut best = (f64::INFINITY, 0);
        for (i, e) in self.elements.iter().enumerate() {
            if same(e, &id) {
                continue;
            }
            let s = (e - &id).singular_values().min();
            if s < best.0 {
                best = (s, i);
            }
        }
        best
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AleLift {
    pub group_order: usize,
    pub invariance_defect: f64,
    pub invariance_samples: usize,
    pub cover_mass: MassReport,
    pub quotient_mass: f64,
    /// `m(cover) / m(quotient)`; equals the group order.
    pub mass_ratio: f64,
    pub passed: bool,
    #[serde(skip)]
    pub cover: MetricSpec,
}

/// Lifts a `Γ`-invariant quotient metric to the cover and audits the mass relation.
///
/// Linear actions share the end chart, so the cover metric is the same evaluator.
pub fn ale_lift(quotient: &MetricSpec, group: &GroupAction, radii: &[f64], order: usize) -> Result<AleLift> {
    let n = quotient.dim();
    if group.dim != n {
        return Err(Error::config(format!(
            "group acts on ℝ^{} but the metric lives on ℝ^{n}",
            group.dim
        )));
    }
    let rule = SphereRule::new(n, 6);
    let mut defect: f64 = 0.0;
    let mut samples = 0;
    for &rho in radii {
        for p in rule.points() {
            let x: Vec<f64> = p.iter().map(|c| c * rho).collect();
            let g = quotient.components(&x);
            let scale = g.amax().max(1.0);
            for t in &group.generators {
                let d = (pullback(quotient, t, &x) - &g).amax() / scale;
                defect = defect.max(d);
                samples += 1;
            }
        }
    }
    if defect > GROUP_TOLERANCE {
        return Err(Error::Precondition {
            inequality: "max |Tᵀ g(Tx) T − g(x)| ≤ 1e-12".into(),
            lhs: defect,
            rhs: GROUP_TOLERANCE,
            anchor: "(π∘Φ⁻¹)*(g_Γ)".into(),
        });
    }
    let cover = quotient.clone();
    let cover_mass = adm_mass(&cover, radii, order)?;
    let k = group.order() as f64;
    let quotient_mass = cover_mass.extrapolated / k;
    let (mass_ratio, passed) = if cover_mass.extrapolated.abs() < 1e-10 {
        (k, quotient_mass.abs() < 1e-10)
    } else {
        let ratio = cover_mass.extrapolated / quotient_mass;
        (ratio, (ratio - k).abs() <= 1e-3 * k)
    };
    Ok(AleLift {
        group_order: group.order(),
        invariance_defect: defect,
        invariance_samples: samples,
        cover_mass,
        quotient_mass,
        mass_ratio,
        passed,
        cover,
    })
}

/// Affine isometry `x ↦ Tx + v`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineIsometry {
    pub linear: DMatrix<f64>,
    pub shift: DVector<f64>,
}

impl AffineIsometry {
    pub fn linear(t: DMatrix<f64>) -> Self {
        let n = t.nrows();
        Self {
            linear: t,
            shift: DVector::zeros(n),
        }
    }

    pub fn translation(v: DVector<f64>) -> Self {
        let n = v.len();
        Self {
            linear: DMatrix::identity(n, n),
            shift: v,
        }
    }

    /// `x ↦ T(x − c) + c`.
    pub fn about(t: DMatrix<f64>, c: &DVector<f64>) -> Self {
        let shift = c - &t * c;
        Self { linear: t, shift }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.linear * x + &self.shift
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &AffineIsometry) -> AffineIsometry {
        AffineIsometry {
            linear: &self.linear * &other.linear,
            shift: &self.linear * &other.shift + &self.shift,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedPoint {
    pub point: DVector<f64>,
    pub max_defect: f64,
}

/// Fixed point `(1/|G|) Σ g(0)` of a finite group of affine isometries.
pub fn fixed_point_of_finite_group(group: &[AffineIsometry]) -> Result<FixedPoint> {
    let first = group.first().ok_or_else(|| Error::config("empty group"))?;
    let n = first.shift.len();
    let mut p = DVector::zeros(n);
    for g in group {
        if g.shift.len() != n || g.linear.nrows() != n || g.linear.ncols() != n {
            return Err(Error::config("group elements have mismatched dimensions"));
        }
        p += &g.shift;
    }
    p /= group.len() as f64;
    let scale = p.amax().max(1.0);
    let mut worst = (0.0, 0);
    for (i, g) in group.iter().enumerate() {
        let d = (g.apply(&p) - &p).amax();
        if d > worst.0 {
            worst = (d, i);
        }
    }
    if worst.0 > GROUP_TOLERANCE * scale {
        return Err(Error::Audit {
            check: "g(p) = p for the averaged point".into(),
            location: format!("element {}", worst.1),
            value: worst.0,
            bound: GROUP_TOLERANCE * scale,
        });
    }
    Ok(FixedPoint {
        point: p,
        max_defect: worst.0,
    })
}
