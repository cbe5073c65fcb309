//! Scene configuration, schema version 1.

use serde::{Deserialize, Serialize};

use masskit::density::DensityOptions;
use masskit::elliptic::{OuterCondition, ToyEnd};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{pointer}: {message}")]
    Invalid { pointer: String, message: String },
}

fn invalid(pointer: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        pointer: pointer.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricConfig {
    Euclidean,
    Schwarzschild {
        mass: f64,
    },
    /// `u^{4/(n−2)}δ` with `u = 1 + Σ_k c_k r^{−(k+1)}`.
    ConformalSeries {
        coefficients: Vec<f64>,
    },
    /// `u^{4/(n−2)}δ` with `u = 1 + c·erf(r/σ)/r^{n−2}`.
    ErfBump {
        amplitude: f64,
        width: f64,
    },
    /// Schwarzschild plus `φ⁴ b/r (δ − x̂x̂)`.
    TangentialShear {
        mass: f64,
        amplitude: f64,
    },
    /// `u^{4/(n−2)}δ` with the flat-harmonic `u = 1 + m/(2r^{n−2}) + d·x/rⁿ`.
    Harmonic {
        mass: f64,
        #[serde(default)]
        dipole: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_mass_relative")]
    pub mass_relative: f64,
    #[serde(default = "default_mass_absolute")]
    pub mass_absolute: f64,
    #[serde(default = "default_solve_relative")]
    pub solve_relative: f64,
    #[serde(default = "default_mass_shift_relative")]
    pub mass_shift_relative: f64,
}

fn default_mass_relative() -> f64 {
    0.01
}
fn default_mass_absolute() -> f64 {
    1e-10
}
fn default_solve_relative() -> f64 {
    1e-4
}
fn default_mass_shift_relative() -> f64 {
    0.01
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            mass_relative: default_mass_relative(),
            mass_absolute: default_mass_absolute(),
            solve_relative: default_solve_relative(),
            mass_shift_relative: default_mass_shift_relative(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassSection {
    /// Expected extrapolated mass; audited against the tolerances when present.
    #[serde(default)]
    pub expected: Option<f64>,
    /// Seeded random points checked for positive-definiteness.
    #[serde(default = "default_audit_points")]
    pub audit_points: usize,
}

fn default_audit_points() -> usize {
    32
}

impl Default for MassSection {
    fn default() -> Self {
        Self {
            expected: None,
            audit_points: default_audit_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Zero,
    /// `a (1 − ((r − c)/w)²)³` on `|r − c| < w`.
    Bump { amplitude: f64, center: f64, width: f64 },
    /// `a x (1 − x²)³` with `x = (r − c)/w`; changes sign at `r = c`.
    SignedBump { amplitude: f64, center: f64, width: f64 },
}

impl PotentialConfig {
    /// `(center, width)` for the compactly supported kinds.
    pub fn support(&self) -> Option<(f64, f64)> {
        match *self {
            PotentialConfig::Zero => None,
            PotentialConfig::Bump { center, width, .. } | PotentialConfig::SignedBump { center, width, .. } => {
                Some((center, width))
            }
        }
    }

    /// Value of the potential at radius `r`.
    pub fn value(&self, r: f64) -> f64 {
        let shape = |center: f64, width: f64| {
            let x = (r - center) / width;
            if x.abs() >= 1.0 {
                (x, 0.0)
            } else {
                (x, (1.0 - x * x).powi(3))
            }
        };
        match *self {
            PotentialConfig::Zero => 0.0,
            PotentialConfig::Bump { amplitude, center, width } => amplitude * shape(center, width).1,
            PotentialConfig::SignedBump { amplitude, center, width } => {
                let (x, b) = shape(center, width);
                amplitude * x * b
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    pub potential: PotentialConfig,
    pub outer_radius: f64,
    #[serde(default = "default_ppd")]
    pub points_per_decade: usize,
    #[serde(default)]
    pub toy_end: Option<ToyEnd>,
    #[serde(default)]
    pub sobolev_constant: Option<f64>,
    #[serde(default = "default_outer")]
    pub outer_condition: OuterCondition,
    /// Expansion coefficient from an independent reference run.
    #[serde(default)]
    pub reference: Option<Reference>,
}

fn default_ppd() -> usize {
    1000
}
fn default_outer() -> OuterCondition {
    OuterCondition::Robin
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompactifySection {
    pub s1: f64,
    #[serde(default = "default_cube_factor")]
    pub cube_factor: f64,
    #[serde(default = "default_radial_samples")]
    pub radial_samples: usize,
    #[serde(default = "default_sphere_order")]
    pub sphere_order: usize,
    #[serde(default = "default_sample_grid")]
    pub sample_grid: usize,
    #[serde(default = "default_chart_grid")]
    pub chart_grid: usize,
    /// Seeded random points in the cube checked for `R ≥ −10⁻⁸`.
    #[serde(default = "default_random_samples")]
    pub random_samples: usize,
}

fn default_cube_factor() -> f64 {
    16.0
}
fn default_radial_samples() -> usize {
    400
}
fn default_sphere_order() -> usize {
    8
}
fn default_sample_grid() -> usize {
    33
}
fn default_chart_grid() -> usize {
    9
}
fn default_random_samples() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineConfig {
    /// Row-major linear part.
    pub linear: Vec<f64>,
    pub shift: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AleSection {
    /// Row-major generator matrices.
    pub generators: Vec<Vec<f64>>,
    #[serde(default)]
    pub expected_quotient_mass: Option<f64>,
    /// Declared, not checked: `π₁` of the end injects into `π₁` of the manifold.
    #[serde(default)]
    pub incompressible: bool,
    #[serde(default)]
    pub affine_group: Option<Vec<AffineConfig>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSection {
    #[serde(default = "default_converge_radii")]
    pub radii: Vec<f64>,
    /// Finite-difference steps, halving.
    #[serde(default = "default_steps")]
    pub steps: Vec<f64>,
    /// `C` in `|R_h − R| ≤ C h²`.
    #[serde(default = "default_constant")]
    pub constant: f64,
    #[serde(default = "default_order_band")]
    pub order_band: [f64; 2],
    /// Mass ladders for the ρ-refinement table.
    #[serde(default)]
    pub mass_ladders: Vec<Vec<f64>>,
}

fn default_converge_radii() -> Vec<f64> {
    vec![2.0, 4.0, 8.0]
}
fn default_steps() -> Vec<f64> {
    vec![0.04, 0.02, 0.01]
}
fn default_constant() -> f64 {
    10.0
}
fn default_order_band() -> [f64; 2] {
    [1.8, 2.2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub schema: u32,
    pub dimension: usize,
    pub metric: MetricConfig,
    #[serde(default = "default_inner_radius")]
    pub inner_radius: f64,
    /// Radius ladder for mass extrapolation.
    #[serde(default)]
    pub radii: Option<Vec<f64>>,
    #[serde(default)]
    pub quadrature_order: Option<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub mass: Option<MassSection>,
    #[serde(default)]
    pub solve: Option<SolveSection>,
    #[serde(default)]
    pub deform: Option<DensityOptions>,
    #[serde(default)]
    pub compactify: Option<CompactifySection>,
    #[serde(default)]
    pub ale: Option<AleSection>,
    #[serde(default)]
    pub converge: Option<ConvergeSection>,
}

fn default_inner_radius() -> f64 {
    1.0
}

impl SceneConfig {
    pub fn from_json(path: &str, text: &str) -> Result<Self, ConfigError> {
        let cfg: SceneConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &str) -> Result<(Self, Vec<u8>), ConfigError> {
        let bytes = std::fs::read(path).map_err(|source| ConfigError::Read {
            path: path.to_string(),
            source,
        })?;
        let text = String::from_utf8_lossy(&bytes);
        Ok((Self::from_json(path, &text)?, bytes))
    }

    pub fn quadrature_order(&self) -> usize {
        self.quadrature_order
            .unwrap_or(if self.dimension == 3 { 16 } else { 8 })
    }

    /// Schema checks shared by all commands.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema != SCHEMA_VERSION {
            return Err(invalid(
                "/schema",
                format!("unsupported schema {}, expected {SCHEMA_VERSION}", self.schema),
            ));
        }
        if !(3..=7).contains(&self.dimension) {
            return Err(invalid("/dimension", "dimension must lie in 3..=7"));
        }
        if !(self.inner_radius > 0.0) {
            return Err(invalid("/inner_radius", "must be positive"));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("mass_relative", t.mass_relative),
            ("mass_absolute", t.mass_absolute),
            ("solve_relative", t.solve_relative),
            ("mass_shift_relative", t.mass_shift_relative),
        ] {
            if !(v > 0.0) {
                return Err(invalid(&format!("/tolerances/{name}"), "tolerances must be positive"));
            }
        }
        if let Some(radii) = &self.radii {
            check_ladder("/radii", radii, self.inner_radius)?;
        }
        if let Some(order) = self.quadrature_order {
            if order < 8 {
                return Err(invalid("/quadrature_order", "must be at least 8"));
            }
        }
        match &self.metric {
            MetricConfig::ErfBump { width, .. } if !(*width > 0.0) => {
                return Err(invalid("/metric/width", "must be positive"));
            }
            MetricConfig::Harmonic {
                dipole: Some(d), ..
            } if d.len() != self.dimension => {
                return Err(invalid("/metric/dipole", "length must equal the dimension"));
            }
            MetricConfig::TangentialShear { .. } if self.dimension != 3 => {
                return Err(invalid("/metric/family", "tangential_shear is defined for n = 3"));
            }
            _ => {}
        }
        if let Some(c) = &self.converge {
            if c.radii.is_empty() || c.radii.iter().any(|r| !(*r > self.inner_radius)) {
                return Err(invalid("/converge/radii", "radii must exceed inner_radius"));
            }
            if c.steps.len() < 2 || c.steps.iter().any(|h| !(*h > 0.0)) {
                return Err(invalid("/converge/steps", "need at least two positive steps"));
            }
            if !(c.constant > 0.0) {
                return Err(invalid("/converge/constant", "must be positive"));
            }
            for (i, l) in c.mass_ladders.iter().enumerate() {
                check_ladder(&format!("/converge/mass_ladders/{i}"), l, self.inner_radius)?;
            }
        }
        if let Some(s) = &self.solve {
            if !(s.outer_radius > self.inner_radius) {
                return Err(invalid("/solve/outer_radius", "must exceed inner_radius"));
            }
            if let Some((center, width)) = s.potential.support() {
                if !(width > 0.0) {
                    return Err(invalid("/solve/potential/width", "must be positive"));
                }
                if center - width < self.inner_radius {
                    return Err(invalid("/solve/potential/center", "support must lie outside inner_radius"));
                }
            }
        }
        if let Some(c) = &self.compactify {
            if !(c.s1 > self.inner_radius) {
                return Err(invalid("/compactify/s1", "must exceed inner_radius"));
            }
            if !(c.cube_factor >= 2.0) {
                return Err(invalid("/compactify/cube_factor", "must be at least 2"));
            }
        }
        if let Some(a) = &self.ale {
            let n2 = self.dimension * self.dimension;
            for (i, g) in a.generators.iter().enumerate() {
                if g.len() != n2 {
                    return Err(invalid(
                        &format!("/ale/generators/{i}"),
                        format!("expected {n2} row-major entries"),
                    ));
                }
            }
            for (i, e) in a.affine_group.iter().flatten().enumerate() {
                if e.linear.len() != n2 || e.shift.len() != self.dimension {
                    return Err(invalid(&format!("/ale/affine_group/{i}"), "wrong entry count"));
                }
            }
        }
        Ok(())
    }

    /// The radius ladder, required by mass-type commands.
    pub fn require_radii(&self) -> Result<&[f64], ConfigError> {
        self.radii
            .as_deref()
            .ok_or_else(|| invalid("/radii", "missing radius ladder (field `radii`)"))
    }

    pub fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T, ConfigError> {
        section
            .as_ref()
            .ok_or_else(|| invalid(&format!("/{name}"), format!("missing section `{name}`")))
    }
}

fn check_ladder(pointer: &str, radii: &[f64], inner: f64) -> Result<(), ConfigError> {
    if radii.len() < 3 {
        return Err(invalid(pointer, "ladder needs at least three radii"));
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid(pointer, "ladder must be strictly increasing"));
    }
    if !(radii[0] > inner) {
        return Err(invalid(pointer, "ladder must start outside inner_radius"));
    }
    Ok(())
}
