use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Tier {
    /// Spherically symmetric problems in any dimension.
    Radial,
    /// Log-radial × latitude × longitude sampling of the 3-dimensional chart.
    Full3d,
}

/// Sampling grid on the end chart.
#[derive(Debug, Clone, Serialize)]
pub struct Grid {
    pub tier: Tier,
    pub dim: usize,
    pub radii: Vec<f64>,
    /// Polar angles, offset half a cell from both poles (FULL3D only).
    pub latitudes: Vec<f64>,
    pub longitudes: Vec<f64>,
    /// Logarithmic radial spacing `Δ log r`.
    pub log_spacing: f64,
}

fn log_radii(r_min: f64, r_max: f64, count: usize) -> Result<(Vec<f64>, f64)> {
    if !(r_min > 0.0 && r_max > r_min) || count < 2 {
        return Err(Error::config(format!(
            "radial range must satisfy 0 < r_min < r_max with >= 2 nodes (got [{r_min}, {r_max}], {count})"
        )));
    }
    let step = (r_max / r_min).ln() / (count - 1) as f64;
    let mut radii: Vec<f64> = (0..count).map(|k| r_min * (step * k as f64).exp()).collect();
    radii[count - 1] = r_max;
    Ok((radii, step))
}

impl Grid {
    pub fn radial(dim: usize, r_min: f64, r_max: f64, count: usize) -> Result<Self> {
        let (radii, log_spacing) = log_radii(r_min, r_max, count)?;
        Ok(Self {
            tier: Tier::Radial,
            dim,
            radii,
            latitudes: Vec::new(),
            longitudes: Vec::new(),
            log_spacing,
        })
    }

    pub fn full3d(r_min: f64, r_max: f64, n_r: usize, n_lat: usize, n_lon: usize) -> Result<Self> {
        if n_lat < 2 || n_lon < 3 {
            return Err(Error::config("FULL3D grid needs >= 2 latitudes and >= 3 longitudes"));
        }
        let (radii, log_spacing) = log_radii(r_min, r_max, n_r)?;
        let latitudes = (0..n_lat)
            .map(|j| PI * (j as f64 + 0.5) / n_lat as f64)
            .collect();
        let longitudes = (0..n_lon)
            .map(|k| 2.0 * PI * k as f64 / n_lon as f64)
            .collect();
        Ok(Self {
            tier: Tier::Full3d,
            dim: 3,
            radii,
            latitudes,
            longitudes,
            log_spacing,
        })
    }

    pub fn node_count(&self) -> usize {
        match self.tier {
            Tier::Radial => self.radii.len(),
            Tier::Full3d => self.radii.len() * self.latitudes.len() * self.longitudes.len(),
        }
    }

    /// Cartesian coordinates of node `index`; radial nodes lie on the first axis.
    pub fn point(&self, index: usize) -> Vec<f64> {
        match self.tier {
            Tier::Radial => {
                let mut x = vec![0.0; self.dim];
                x[0] = self.radii[index];
                x
            }
            Tier::Full3d => {
                let per_shell = self.latitudes.len() * self.longitudes.len();
                let r = self.radii[index / per_shell];
                let rest = index % per_shell;
                let theta = self.latitudes[rest / self.longitudes.len()];
                let phi = self.longitudes[rest % self.longitudes.len()];
                vec![
                    r * theta.sin() * phi.cos(),
                    r * theta.sin() * phi.sin(),
                    r * theta.cos(),
                ]
            }
        }
    }

    /// Radius of node `index`.
    pub fn node_radius(&self, index: usize) -> f64 {
        match self.tier {
            Tier::Radial => self.radii[index],
            Tier::Full3d => self.radii[index / (self.latitudes.len() * self.longitudes.len())],
        }
    }

    /// Difference step at each radius, `min(0.01 r, 0.05)`.
    pub fn step_at(&self, index: usize) -> f64 {
        super::curvature::default_step(self.node_radius(index))
    }
}

/// Per-node values of a scalar, vector or symmetric 2-tensor field.
#[derive(Debug, Clone, Serialize)]
pub struct TensorField {
    pub rank: u8,
    pub components: usize,
    pub values: Vec<f64>,
    pub symmetric: bool,
}

impl TensorField {
    pub fn node(&self, index: usize) -> &[f64] {
        &self.values[index * self.components..(index + 1) * self.components]
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.components
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Evaluates a scalar on every node; nodes are independent, so the sweep is
    /// data-parallel and the result does not depend on partitioning.
    pub fn sample_scalar<F>(grid: &Grid, f: F) -> Result<Self>
    where
        F: Fn(&[f64], f64) -> Result<f64> + Sync,
    {
        let values = (0..grid.node_count())
            .into_par_iter()
            .map(|i| f(&grid.point(i), grid.step_at(i)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self {
            rank: 0,
            components: 1,
            values,
            symmetric: false,
        })
    }

    /// Value at the pole of shell `shell`, taken as the longitude average of the
    /// latitude ring adjacent to that pole.
    pub fn polar_value(&self, grid: &Grid, shell: usize, north: bool) -> f64 {
        assert_eq!(self.rank, 0);
        assert_eq!(grid.tier, Tier::Full3d);
        let n_lon = grid.longitudes.len();
        let n_lat = grid.latitudes.len();
        let ring = if north { 0 } else { n_lat - 1 };
        let base = shell * n_lat * n_lon + ring * n_lon;
        self.values[base..base + n_lon].iter().sum::<f64>() / n_lon as f64
    }
}
