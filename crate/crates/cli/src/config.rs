//! Pipeline configuration file (JSON or TOML). Every field has a desk-scale
//! default, so an empty file is a valid config.

use serde::{Deserialize, Serialize};
use sixway_core::baker::{BakeConfig, EmissiveLut};
use sixway_core::bench::BenchSettings;
use sixway_core::guiding::GuidingConfig;
use sixway_core::math::Aabb;
use sixway_core::runtime::{DirectionalLight, Occluder, DEFAULT_DEPTH_BIAS, DEFAULT_SHADOW_RES};
use sixway_core::volume::{Camera, MediumParams, ProceduralKind, Projection};
use sixway_core::Vec3;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProceduralConfig {
    pub kind: String,
    pub seed: u64,
    pub dims: [usize; 3],
    pub frames: usize,
}

impl Default for ProceduralConfig {
    fn default() -> Self {
        Self { kind: "sphere_puff".into(), seed: 0, dims: [64; 3], frames: 1 }
    }
}

impl ProceduralConfig {
    pub fn kind(&self) -> Result<ProceduralKind, ConfigError> {
        self.kind.parse().map_err(|e: sixway_core::volume::ProceduralError| ConfigError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionKind {
    Orthographic,
    Perspective,
}

/// Camera placed on an orbit around the grid center. Unset lengths are
/// derived from the grid bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub projection: ProjectionKind,
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub width: usize,
    pub height: usize,
    pub fov_deg: f64,
    pub ortho_height: Option<f64>,
    pub distance: Option<f64>,
    pub near: Option<f64>,
    pub far: Option<f64>,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            projection: ProjectionKind::Orthographic,
            yaw_deg: 0.0,
            pitch_deg: 0.0,
            width: 128,
            height: 128,
            fov_deg: 45.0,
            ortho_height: None,
            distance: None,
            near: None,
            far: None,
        }
    }
}

impl CameraConfig {
    pub fn resolve(&self, bounds: &Aabb) -> Result<Camera, ConfigError> {
        let target = (bounds.min + bounds.max) * 0.5;
        let size = bounds.max - bounds.min;
        let radius = size.length() * 0.5;
        let distance = self.distance.unwrap_or(3.0 * radius);
        let (yaw, pitch) = (self.yaw_deg.to_radians(), self.pitch_deg.to_radians());
        let offset = Vec3::new(yaw.sin() * pitch.cos(), -yaw.cos() * pitch.cos(), pitch.sin()) * distance;
        let projection = match self.projection {
            ProjectionKind::Orthographic => {
                Projection::Orthographic { height: self.ortho_height.unwrap_or(1.1 * size.x.max(size.y).max(size.z)) }
            }
            ProjectionKind::Perspective => Projection::Perspective { vertical_fov_deg: self.fov_deg },
        };
        let near = self.near.unwrap_or(0.0);
        let far = self.far.unwrap_or(distance + 2.0 * radius);
        let up = if pitch.cos().abs() < 1e-6 { Vec3::Y } else { Vec3::Z };
        Camera::look_at(projection, target + offset, target, up, (self.width, self.height), near, far)
            .map_err(|e| ConfigError::Invalid(format!("camera: {e}")))
    }
}

/// Dataset view ring around the template camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RingConfig {
    pub count: usize,
    pub start_yaw_deg: f64,
    pub step_deg: f64,
}

impl Default for RingConfig {
    fn default() -> Self {
        Self { count: 9, start_yaw_deg: 0.0, step_deg: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightConfig {
    /// Direction the light travels (from the light toward the scene).
    pub dir: [f64; 3],
    #[serde(default = "white")]
    pub rgb: [f32; 3],
}

fn white() -> [f32; 3] {
    [1.0; 3]
}

impl LightConfig {
    pub fn to_light(&self) -> Result<DirectionalLight, ConfigError> {
        let d = Vec3::new(self.dir[0], self.dir[1], self.dir[2])
            .try_normalize()
            .ok_or_else(|| ConfigError::Invalid("light direction must be non-zero".into()))?;
        DirectionalLight::new(d, self.rgb).map_err(|e| ConfigError::Invalid(format!("light: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShadowConfig {
    pub resolution: usize,
    pub bias: f64,
}

impl Default for ShadowConfig {
    fn default() -> Self {
        Self { resolution: DEFAULT_SHADOW_RES, bias: DEFAULT_DEPTH_BIAS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub procedural: ProceduralConfig,
    pub camera: CameraConfig,
    pub ring: RingConfig,
    pub medium: MediumParams,
    pub phase_g: f64,
    pub guiding: GuidingConfig,
    pub bake: BakeConfig,
    pub lut: EmissiveLut,
    /// Step of the emissive integral; defaults to half a voxel.
    pub emissive_step: Option<f64>,
    pub lights: Vec<LightConfig>,
    pub background: [f32; 3],
    pub occluders: Vec<Occluder>,
    pub shadow: ShadowConfig,
    pub weights: Option<PathBuf>,
    pub bench: BenchSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            procedural: ProceduralConfig::default(),
            camera: CameraConfig::default(),
            ring: RingConfig::default(),
            medium: MediumParams { sigma_s_scale: 0.1, sigma_a_scale: 0.02 },
            phase_g: 0.0,
            guiding: GuidingConfig::default(),
            bake: BakeConfig::default(),
            lut: EmissiveLut { remap_scale: 0.0, ..EmissiveLut::default() },
            emissive_step: None,
            lights: vec![LightConfig { dir: [0.3, 0.5, -0.8], rgb: [1.0; 3] }],
            background: [0.0; 3],
            occluders: Vec::new(),
            shadow: ShadowConfig::default(),
            weights: None,
            bench: BenchSettings::default(),
        }
    }
}

impl PipelineConfig {
    /// Loads a config by extension: `.toml` as TOML, anything else as JSON.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        let parse_err = |message: String| ConfigError::Parse { path: path.display().to_string(), message };
        let cfg: Self = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml")) {
            toml::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        } else {
            serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        self.procedural.kind()?;
        self.medium.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        sixway_core::volume::PhaseFunction::new(self.phase_g).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.guiding.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.bake.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.lut.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.bench.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for l in &self.lights {
            l.to_light()?;
        }
        if let Some(s) = self.emissive_step {
            if !(s > 0.0 && s.is_finite()) {
                return invalid(format!("emissive_step must be positive, got {s}"));
            }
        }
        if self.camera.width == 0 || self.camera.height == 0 {
            return invalid("camera resolution must be at least 1x1".into());
        }
        if self.ring.count == 0 {
            return invalid("ring.count must be at least 1".into());
        }
        if let Some(w) = &self.weights {
            if !w.exists() {
                return invalid(format!("missing weights: {} does not exist", w.display()));
            }
        }
        Ok(())
    }

    pub fn lights(&self) -> Result<Vec<DirectionalLight>, ConfigError> {
        self.lights.iter().map(LightConfig::to_light).collect()
    }
}
