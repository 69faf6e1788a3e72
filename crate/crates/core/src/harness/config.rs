//! Declarative run configuration (TOML).

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::anisotropy::AnisotropySpec;
use crate::geometry::Shape;
use crate::kernel::KernelSpec;
use crate::scheme::SchemeConfig;
use crate::shapes::ShapeSpec;
use crate::tensions::TensionSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    #[default]
    Run,
    Energy,
    Converge,
    Monotonic,
    Inequalities,
    Angle,
    Validate,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Experiment::Run => "run",
            Experiment::Energy => "energy",
            Experiment::Converge => "converge",
            Experiment::Monotonic => "monotonic",
            Experiment::Inequalities => "inequalities",
            Experiment::Angle => "angle",
            Experiment::Validate => "validate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
}

/// How the tension expressions become the fields used by the energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensionFields {
    /// Run the extension construction on the raw tensions.
    #[default]
    Constructed,
    /// Evaluate the expressions pointwise and use them as the extended fields.
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSpec {
    pub h: Vec<f64>,
}

impl Default for ConvergeSpec {
    fn default() -> Self {
        Self { h: vec![4e-3, 1e-3, 2.5e-4] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonotonicSpec {
    pub h: Vec<f64>,
    pub factors: Vec<usize>,
    /// Random fields per `(h, N)`; the initial shape indicator is added when present.
    pub samples: usize,
}

impl Default for MonotonicSpec {
    fn default() -> Self {
        Self { h: vec![1e-3], factors: vec![2, 3, 4], samples: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InequalitySpec {
    pub h: Vec<f64>,
    pub samples: usize,
}

impl Default for InequalitySpec {
    fn default() -> Self {
        Self { h: vec![4e-3, 8e-3, 1.6e-2], samples: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleSpec {
    /// `(gamma_SP - gamma_SV) / (gamma_PV gamma)`; Young's angle is `acos(-ratio)`.
    pub sigma_ratio: f64,
    pub radius: f64,
    pub center_x: f64,
    /// Contact angle of the seeded cap, degrees.
    pub initial_angle: f64,
    /// Excluded wall layer for the arc fit, in units of `sqrt(h)`.
    pub wall_layer: f64,
    /// Window of the local fit, in cells.
    pub window: usize,
    /// Accepted deviation from Young's angle, degrees.
    pub tolerance: f64,
}

impl Default for AngleSpec {
    fn default() -> Self {
        Self {
            sigma_ratio: 0.0,
            radius: 0.25,
            center_x: 0.5,
            initial_angle: 90.0,
            wall_layer: crate::scheme::DEFAULT_WALL_LAYER,
            window: crate::scheme::DEFAULT_ANGLE_WINDOW,
            tolerance: 5.0,
        }
    }
}

fn default_geometry() -> Shape {
    Shape::Torus
}

fn default_anisotropy() -> AnisotropySpec {
    AnisotropySpec::Isotropic { c0: 1.0 / std::f64::consts::PI.sqrt() }
}

fn default_kernel() -> KernelSpec {
    KernelSpec::Gaussian
}

fn default_tensions() -> TensionSpec {
    TensionSpec { pv: "1".into(), sp: "0.5".into(), sv: "0.5".into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub experiment: Experiment,
    pub grid: GridSpec,
    #[serde(default = "default_geometry")]
    pub geometry: Shape,
    /// Strip width in cells; defaults to 8.
    #[serde(default)]
    pub delta_cells: Option<f64>,
    #[serde(default = "default_anisotropy")]
    pub anisotropy: AnisotropySpec,
    #[serde(default = "default_kernel")]
    pub kernel: KernelSpec,
    #[serde(default = "default_tensions")]
    pub tensions: TensionSpec,
    #[serde(default)]
    pub tension_fields: TensionFields,
    #[serde(default)]
    pub scheme: Option<SchemeConfig>,
    /// Initial particle for `run` and `energy`, and the shape of `converge`.
    #[serde(default)]
    pub initial: Option<ShapeSpec>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub converge: ConvergeSpec,
    #[serde(default)]
    pub monotonic: MonotonicSpec,
    #[serde(default)]
    pub inequalities: InequalitySpec,
    #[serde(default)]
    pub angle: AngleSpec,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Canonical JSON echo of the configuration.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON echo.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.to_json()).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn scheme(&self) -> Result<&SchemeConfig, HarnessError> {
        self.scheme.as_ref().ok_or_else(|| HarnessError::Config("missing key `scheme` (needed for this experiment)".into()))
    }

    /// Consistency checks that do not need the numerics.
    pub fn check(&self) -> Result<(), HarnessError> {
        if !(1..=3).contains(&self.grid.dim) {
            return Err(HarnessError::Config(format!("grid.dim must be 1, 2 or 3, got {}", self.grid.dim)));
        }
        let dx = 1.0 / self.grid.n as f64;
        let mut hs: Vec<(&str, f64)> = Vec::new();
        if let Some(s) = &self.scheme {
            hs.push(("scheme.h", s.h));
        }
        match self.experiment {
            Experiment::Converge => hs.extend(self.converge.h.iter().map(|&h| ("converge.h", h))),
            Experiment::Monotonic => hs.extend(self.monotonic.h.iter().map(|&h| ("monotonic.h", h))),
            Experiment::Inequalities => hs.extend(self.inequalities.h.iter().map(|&h| ("inequalities.h", h))),
            _ => {}
        }
        for (key, h) in hs {
            if !(h > 0.0) {
                return Err(HarnessError::Config(format!("{key} must be positive, got {h}")));
            }
            if h.sqrt() < dx {
                return Err(HarnessError::Config(format!("{key} = {h}: sqrt(h) is below the grid spacing {dx}")));
            }
        }
        if self.experiment == Experiment::Monotonic && self.monotonic.factors.iter().any(|&f| f < 2) {
            return Err(HarnessError::Config("monotonic.factors must be at least 2".into()));
        }
        if matches!(self.experiment, Experiment::Run | Experiment::Angle) {
            self.scheme()?;
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    RunConfig::from_toml(&text)
}
