//! Christoffel symbols, scalar and Ricci curvature by central differences.
//!
//! All derivatives are second-order central differences of the closed-form
//! metric evaluator. Second derivatives are obtained by nesting first
//! differences, so every stencil reaches `2h` from the evaluation point.

use nalgebra::{DMatrix, DVector};

use super::metric::{radius, MetricSpec};
use crate::error::{Error, Result};

/// Default difference step at radius `r`.
pub fn default_step(r: f64) -> f64 {
    (0.01 * r).min(0.05)
}

fn check_stencil(metric: &MetricSpec, x: &[f64], h: f64) -> Result<()> {
    let clearance = radius(x) - 2.0 * h;
    if !(h > 0.0) || !(clearance > metric.inner_radius()) {
        return Err(Error::Domain {
            point: x.to_vec(),
            clearance,
            inner: metric.inner_radius(),
        });
    }
    Ok(())
}

fn shifted(x: &[f64], axis: usize, delta: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[axis] += delta;
    y
}

/// First derivatives `∂_k g_ij` at `x`, one matrix per `k`.
pub fn metric_gradient(metric: &MetricSpec, x: &[f64], h: f64) -> Vec<DMatrix<f64>> {
    (0..metric.dim())
        .map(|k| {
            let plus = metric.components(&shifted(x, k, h));
            let minus = metric.components(&shifted(x, k, -h));
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Second derivatives `∂_k ∂_l g_ij`, indexed `[k * n + l]`.
pub fn metric_hessian(metric: &MetricSpec, x: &[f64], h: f64) -> Vec<DMatrix<f64>> {
    let n = metric.dim();
    let center = metric.components(x);
    let mut out = vec![DMatrix::zeros(n, n); n * n];
    for k in 0..n {
        for l in k..n {
            let d = if k == l {
                let p = metric.components(&shifted(x, k, h));
                let m = metric.components(&shifted(x, k, -h));
                (p + m - &center * 2.0) / (h * h)
            } else {
                let pp = metric.components(&shifted(&shifted(x, k, h), l, h));
                let pm = metric.components(&shifted(&shifted(x, k, h), l, -h));
                let mp = metric.components(&shifted(&shifted(x, k, -h), l, h));
                let mm = metric.components(&shifted(&shifted(x, k, -h), l, -h));
                (pp - pm - mp + mm) / (4.0 * h * h)
            };
            out[k * n + l] = d.clone();
            out[l * n + k] = d;
        }
    }
    out
}

fn invert(g: &DMatrix<f64>, x: &[f64]) -> Result<DMatrix<f64>> {
    g.clone().try_inverse().ok_or_else(|| Error::Degenerate {
        point: x.to_vec(),
        detail: "metric is not invertible".into(),
    })
}

/// Christoffel symbols of the first kind `Γ_ijk = ½(g_jk,i + g_ik,j − g_ij,k)`
/// together with the contraction `Γ_k = g^{ij} Γ_ijk`.
#[derive(Debug, Clone)]
pub struct Christoffel {
    n: usize,
    first_kind: Vec<f64>,
    pub contracted: Vec<f64>,
}

impl Christoffel {
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.first_kind[(i * self.n + j) * self.n + k]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn from_parts(g_inv: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Self {
        let n = g_inv.nrows();
        let mut first_kind = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    first_kind[(i * n + j) * n + k] =
                        0.5 * (dg[i][(j, k)] + dg[j][(i, k)] - dg[k][(i, j)]);
                }
            }
        }
        let mut contracted = vec![0.0; n];
        for (k, c) in contracted.iter_mut().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    *c += g_inv[(i, j)] * first_kind[(i * n + j) * n + k];
                }
            }
        }
        Self {
            n,
            first_kind,
            contracted,
        }
    }
}

pub fn christoffel_first_kind(metric: &MetricSpec, x: &[f64], h: f64) -> Result<Christoffel> {
    check_stencil(metric, x, h)?;
    let g = metric.components(x);
    let g_inv = invert(&g, x)?;
    let dg = metric_gradient(metric, x, h);
    Ok(Christoffel::from_parts(&g_inv, &dg))
}

/// Local geometric data needed by the scalar curvature formula.
struct LocalFrame {
    g_inv: DMatrix<f64>,
    sqrt_det: f64,
    gamma: Christoffel,
    dlog_det: Vec<f64>,
}

impl LocalFrame {
    fn at(metric: &MetricSpec, x: &[f64], h: f64) -> Result<Self> {
        let g = metric.components(x);
        let det = g.determinant();
        if !(det > 0.0) {
            return Err(Error::Degenerate {
                point: x.to_vec(),
                detail: format!("det g = {det:.3e}"),
            });
        }
        let g_inv = invert(&g, x)?;
        let dg = metric_gradient(metric, x, h);
        // ∂_j log|g| = g^{ab} ∂_j g_ab
        let dlog_det = dg
            .iter()
            .map(|d| g_inv.component_mul(d).sum())
            .collect::<Vec<_>>();
        let gamma = Christoffel::from_parts(&g_inv, &dg);
        Ok(Self {
            g_inv,
            sqrt_det: det.sqrt(),
            gamma,
            dlog_det,
        })
    }

    /// `|g|^{1/2} g^{ij} (Γ_j − ½ ∂_j log|g|)`.
    fn flux_vector(&self) -> DVector<f64> {
        let n = self.g_inv.nrows();
        let v = DVector::from_fn(n, |j, _| self.gamma.contracted[j] - 0.5 * self.dlog_det[j]);
        &self.g_inv * v * self.sqrt_det
    }
}

/// Scalar curvature from the divergence form
/// `R = |g|^{-1/2} ∂_i(|g|^{1/2} g^{ij}(Γ_j − ½∂_j log|g|)) − ½ g^{ij} Γ_i ∂_j log|g|
///      + g^{ij} g^{kl} g^{pq} Γ_ikp Γ_jql`.
pub fn scalar_curvature_bartnik(metric: &MetricSpec, x: &[f64], h: f64) -> Result<f64> {
    check_stencil(metric, x, h)?;
    let n = metric.dim();
    let center = LocalFrame::at(metric, x, h)?;

    let mut divergence = 0.0;
    for i in 0..n {
        let plus = LocalFrame::at(metric, &shifted(x, i, h), h)?.flux_vector();
        let minus = LocalFrame::at(metric, &shifted(x, i, -h), h)?.flux_vector();
        divergence += (plus[i] - minus[i]) / (2.0 * h);
    }

    let g_inv = &center.g_inv;
    let gamma = &center.gamma;
    let mut log_term = 0.0;
    for i in 0..n {
        for j in 0..n {
            log_term += g_inv[(i, j)] * gamma.contracted[i] * center.dlog_det[j];
        }
    }

    // raise all three indices of Γ_jql once, then contract with Γ_ikp
    let mut raised = vec![0.0; n * n * n];
    for i in 0..n {
        for p in 0..n {
            for k in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    for q in 0..n {
                        for l in 0..n {
                            acc += g_inv[(i, j)]
                                * g_inv[(p, q)]
                                * g_inv[(k, l)]
                                * gamma.get(j, q, l);
                        }
                    }
                }
                raised[(i * n + p) * n + k] = acc;
            }
        }
    }
    let mut quadratic = 0.0;
    for i in 0..n {
        for k in 0..n {
            for p in 0..n {
                quadratic += gamma.get(i, k, p) * raised[(i * n + p) * n + k];
            }
        }
    }

    Ok(divergence / center.sqrt_det - 0.5 * log_term + quadratic)
}

/// Scalar curvature of `φ^{4/(n-2)} g` from the base curvature and `Δ_g φ`.
pub fn scalar_curvature_conformal(
    n: usize,
    base_scalar: f64,
    factor: f64,
    laplacian_factor: f64,
) -> Result<f64> {
    if !(factor > 0.0) {
        return Err(Error::Positivity(format!(
            "conformal factor must be positive, got {factor:.6e}"
        )));
    }
    let nf = n as f64;
    let lead = -4.0 * (nf - 1.0) / (nf - 2.0) * laplacian_factor + base_scalar * factor;
    Ok(factor.powf(-(nf + 2.0) / (nf - 2.0)) * lead)
}

/// Christoffel symbols of the second kind `Γ^k_ij`, indexed `[(k * n + i) * n + j]`.
fn second_kind(metric: &MetricSpec, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = metric.dim();
    let g = metric.components(x);
    let g_inv = invert(&g, x)?;
    let dg = metric_gradient(metric, x, h);
    let first = Christoffel::from_parts(&g_inv, &dg);
    let mut out = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += g_inv[(k, l)] * first.get(i, j, l);
                }
                out[(k * n + i) * n + j] = acc;
            }
        }
    }
    Ok(out)
}

/// Ricci tensor `R_ij = ∂_k Γ^k_ij − ∂_j Γ^k_ik + Γ^k_kl Γ^l_ij − Γ^k_jl Γ^l_ik`.
pub fn ricci_tensor_fd(metric: &MetricSpec, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
    check_stencil(metric, x, h)?;
    let n = metric.dim();
    let idx = |k: usize, i: usize, j: usize| (k * n + i) * n + j;
    let gamma = second_kind(metric, x, h)?;
    // dgamma[m][..] = ∂_m Γ^k_ij
    let mut dgamma = Vec::with_capacity(n);
    for m in 0..n {
        let plus = second_kind(metric, &shifted(x, m, h), h)?;
        let minus = second_kind(metric, &shifted(x, m, -h), h)?;
        dgamma.push(
            plus.iter()
                .zip(&minus)
                .map(|(p, q)| (p - q) / (2.0 * h))
                .collect::<Vec<_>>(),
        );
    }
    let mut ric = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += dgamma[k][idx(k, i, j)] - dgamma[j][idx(k, i, k)];
                for l in 0..n {
                    acc += gamma[idx(k, k, l)] * gamma[idx(l, i, j)]
                        - gamma[idx(k, j, l)] * gamma[idx(l, i, k)];
                }
            }
            ric[(i, j)] = acc;
            ric[(j, i)] = acc;
        }
    }
    Ok(ric)
}

/// Trace `g^{ij} Ric_ij`.
pub fn ricci_trace(metric: &MetricSpec, x: &[f64], ric: &DMatrix<f64>) -> Result<f64> {
    let g_inv = invert(&metric.components(x), x)?;
    Ok(g_inv.component_mul(ric).sum())
}

/// Pointwise norm `|T|_g = sqrt(g^{ik} g^{jl} T_ij T_kl)` of a symmetric 2-tensor.
pub fn tensor_norm(g: &DMatrix<f64>, t: &DMatrix<f64>) -> f64 {
    match g.clone().try_inverse() {
        Some(g_inv) => {
            let raised = &g_inv * t * &g_inv;
            raised.component_mul(t).sum().max(0.0).sqrt()
        }
        None => f64::NAN,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::metric::ScalarFn;

    #[test]
    fn euclidean_has_vanishing_connection_and_curvature() {
        let g = MetricSpec::euclidean(3);
        let x = [2.0, 1.0, -0.5];
        let c = christoffel_first_kind(&g, &x, 0.05).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    assert_eq!(c.get(i, j, k), 0.0);
                }
            }
        }
        assert_eq!(scalar_curvature_bartnik(&g, &x, 0.05).unwrap(), 0.0);
        assert_eq!(ricci_tensor_fd(&g, &x, 0.05).unwrap().amax(), 0.0);
    }

    #[test]
    fn stencil_leaving_the_chart_is_a_domain_error() {
        let g = MetricSpec::schwarzschild(3, 1.0);
        let err = scalar_curvature_bartnik(&g, &[1.05, 0.0, 0.0], 0.05).unwrap_err();
        assert!(matches!(err, Error::Domain { .. }));
    }

    #[test]
    fn conformal_formula_identity_and_harmonic_cases() {
        assert_eq!(scalar_curvature_conformal(3, 0.7, 1.0, 0.0).unwrap(), 0.7);
        assert_eq!(scalar_curvature_conformal(4, 0.0, 1.3, 0.0).unwrap(), 0.0);
        assert!(matches!(
            scalar_curvature_conformal(3, 0.0, 0.0, 1.0),
            Err(Error::Positivity(_))
        ));
    }

    #[test]
    fn degenerate_stencil_node_is_reported() {
        // factor vanishes on the sphere r = 3
        let g = MetricSpec::conformally_flat(3, ScalarFn::radial(|r| r - 3.0));
        let err = scalar_curvature_bartnik(&g, &[3.0, 0.0, 0.0], 0.05).unwrap_err();
        assert!(matches!(err, Error::Degenerate { .. }));
    }
}
