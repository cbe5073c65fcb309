//! Metric families available to scenes.

use masskit::compactification::HarmonicFactor;
use masskit::geometry::{MetricSpec, Perturbation, ScalarFn};

use crate::config::{MetricConfig, SceneConfig};

pub fn build_metric(cfg: &SceneConfig) -> masskit::Result<MetricSpec> {
    let n = cfg.dimension;
    let spec = match &cfg.metric {
        MetricConfig::Euclidean => MetricSpec::euclidean(n),
        MetricConfig::Schwarzschild { mass } => MetricSpec::schwarzschild(n, *mass),
        MetricConfig::ConformalSeries { coefficients } => {
            let c = coefficients.clone();
            MetricSpec::conformally_flat(
                n,
                ScalarFn::radial(move |r| {
                    1.0 + c
                        .iter()
                        .enumerate()
                        .map(|(k, ck)| ck * r.powi(-(k as i32 + 1)))
                        .sum::<f64>()
                }),
            )
        }
        MetricConfig::ErfBump { amplitude, width } => {
            let (a, w) = (*amplitude, *width);
            MetricSpec::conformally_flat(
                n,
                ScalarFn::radial(move |r| 1.0 + a * libm::erf(r / w) / r.powi(n as i32 - 2)),
            )
        }
        MetricConfig::TangentialShear { mass, amplitude } => {
            let (m, b) = (*mass, *amplitude);
            let phi4 = move |r: f64| (1.0 + m / (2.0 * r)).powi(4);
            MetricSpec::perturbed(
                MetricSpec::schwarzschild(3, m),
                Perturbation::radial(move |r| phi4(r) * b / r, move |r| -phi4(r) * b / r),
            )
        }
        MetricConfig::Harmonic { .. } => {
            let u = harmonic_factor(cfg)?.expect("harmonic family");
            MetricSpec::conformally_flat(n, ScalarFn::general(move |x| u.eval(x)))
        }
    };
    Ok(spec.with_inner_radius(cfg.inner_radius))
}

/// The harmonic factor of the end, for families that are flat-harmonic conformal.
pub fn harmonic_factor(cfg: &SceneConfig) -> masskit::Result<Option<HarmonicFactor>> {
    let n = cfg.dimension;
    match &cfg.metric {
        MetricConfig::Schwarzschild { mass } => HarmonicFactor::monopole(n, *mass).map(Some),
        MetricConfig::Harmonic { mass, dipole } => {
            HarmonicFactor::new(n, *mass, dipole.clone().unwrap_or_else(|| vec![0.0; n])).map(Some)
        }
        _ => Ok(None),
    }
}

/// Exact scalar curvature along a ray, when the family has a closed form.
pub fn exact_scalar(cfg: &SceneConfig) -> Option<Box<dyn Fn(f64) -> f64>> {
    let nf = cfg.dimension as f64;
    match &cfg.metric {
        MetricConfig::Euclidean | MetricConfig::Schwarzschild { .. } | MetricConfig::Harmonic { .. } => {
            Some(Box::new(|_| 0.0))
        }
        MetricConfig::ConformalSeries { coefficients } => {
            let c = coefficients.clone();
            Some(Box::new(move |r: f64| {
                let (mut u, mut du, mut ddu) = (1.0, 0.0, 0.0);
                for (k, ck) in c.iter().enumerate() {
                    let p = -(k as f64 + 1.0);
                    u += ck * r.powf(p);
                    du += ck * p * r.powf(p - 1.0);
                    ddu += ck * p * (p - 1.0) * r.powf(p - 2.0);
                }
                let lap = ddu + (nf - 1.0) * du / r;
                -4.0 * (nf - 1.0) / (nf - 2.0) * u.powf(-(nf + 2.0) / (nf - 2.0)) * lap
            }))
        }
        _ => None,
    }
}
