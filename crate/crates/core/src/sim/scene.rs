//! Scene description loaded from JSON.
//!
//! Lengths are meters, angles radians, times milliseconds unless the field
//! name says otherwise. `registry` is a directory path, resolved relative to
//! the scene file, holding the layout tables and `pipeline.json`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geometry::{vec3_array, Pose, Quaternion, Vec2, Vec3};
use crate::registry::{Registry, RegistryError};
use crate::runtime::PipelineConfig;
use crate::servo::{ControllerConfig, ServoError};

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Controller(#[from] ServoError),
    #[error("invalid scene: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadSway {
    #[serde(with = "vec3_array")]
    pub amplitude_m: Vec3,
    pub period_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    #[serde(with = "vec3_array")]
    pub eye: Vec3,
    #[serde(with = "vec3_array")]
    pub target: Vec3,
    #[serde(default)]
    pub sway: Option<HeadSway>,
}

impl HeadConfig {
    /// Camera-to-world pose at time `t_ms`.
    pub fn camera_pose(&self, t_ms: u64) -> Pose {
        let eye = match &self.sway {
            Some(s) if s.period_s > 0.0 => {
                let phase = 2.0 * std::f64::consts::PI * (t_ms as f64 / 1000.0) / s.period_s;
                self.eye + s.amplitude_m * phase.sin()
            }
            _ => self.eye,
        };
        Pose::look_at(eye, self.target, Vec3::z())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StencilConfig {
    pub sheet_min: [f64; 2],
    pub sheet_max: [f64; 2],
    pub square_edge_m: f64,
    pub squares: Vec<[f64; 2]>,
}

impl StencilConfig {
    pub fn square_center(&self, i: usize) -> Vec2 {
        Vec2::new(self.squares[i][0], self.squares[i][1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeConfig {
    pub edge_m: f64,
    pub positions: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndEffectorConfig {
    #[serde(with = "vec3_array")]
    pub start: Vec3,
    pub grasp_radius_m: f64,
    pub contact_margin_m: f64,
    pub stiffness_n_per_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attachment {
    /// Moves rigidly with the end-effector.
    Ee,
    World,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mount {
    pub name: String,
    pub attach: Attachment,
    /// Mount frame relative to the end-effector or world frame.
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerPlacement {
    pub id: u32,
    pub mount: String,
    #[serde(with = "vec3_array")]
    pub p: Vec3,
    #[serde(default)]
    pub q: Quaternion,
}

impl MarkerPlacement {
    pub fn local_pose(&self) -> Pose {
        Pose::new(self.p, self.q)
    }
}

/// Omitted fields take their [`Default`] (noise off).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub marker_translation_sigma_m: f64,
    pub marker_rotation_sigma_rad: f64,
    /// Per-marker, per-frame probability of a missed detection.
    pub marker_dropout: f64,
    pub gaze_sigma_px: f64,
    /// Random-walk bias: per-axis standard deviation grows as `rate · √t`.
    pub gaze_drift_px_per_sqrt_s: f64,
    /// Markers seen at a larger angle between normal and camera ray are lost.
    pub visibility_cone_rad: f64,
    /// Scripted blink windows `[start, end)` in ms; gaze is invalid inside.
    pub blinks_ms: Vec<[u64; 2]>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            marker_translation_sigma_m: 0.0,
            marker_rotation_sigma_rad: 0.0,
            marker_dropout: 0.0,
            gaze_sigma_px: 0.0,
            gaze_drift_px_per_sqrt_s: 0.0,
            visibility_cone_rad: 1.3,
            blinks_ms: Vec::new(),
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), SceneError> {
        let non_negative = [
            self.marker_translation_sigma_m,
            self.marker_rotation_sigma_rad,
            self.gaze_sigma_px,
            self.gaze_drift_px_per_sqrt_s,
            self.visibility_cone_rad,
        ];
        if non_negative.iter().any(|v| !(*v >= 0.0)) {
            return Err(SceneError::Invalid("noise parameters must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.marker_dropout) {
            return Err(SceneError::Invalid("dropout probability must be in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn in_blink(&self, t: u64) -> bool {
        self.blinks_ms.iter().any(|[a, b]| (*a..*b).contains(&t))
    }
}

/// The scene file as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub registry: PathBuf,
    pub seed: u64,
    pub table_height_m: f64,
    pub controller: ControllerConfig,
    pub head: HeadConfig,
    pub stencil: StencilConfig,
    pub cubes: CubeConfig,
    pub end_effector: EndEffectorConfig,
    pub mounts: Vec<Mount>,
    pub markers: Vec<MarkerPlacement>,
    #[serde(default)]
    pub noise: NoiseConfig,
}

/// A loaded scene: the file contents plus the layout and pipeline settings
/// from its registry directory.
#[derive(Debug, Clone)]
pub struct SceneConfig {
    pub file: SceneFile,
    pub registry: Registry,
    pub pipeline: PipelineConfig,
}

fn read(path: &Path) -> Result<String, SceneError> {
    std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, SceneError> {
    serde_json::from_str(text).map_err(|source| SceneError::Json {
        path: path.display().to_string(),
        source,
    })
}

/// Reads `pipeline.json` from a registry directory.
pub fn load_pipeline_config(registry_dir: &Path) -> Result<PipelineConfig, SceneError> {
    let path = registry_dir.join("pipeline.json");
    let config: PipelineConfig = parse_json(&path, &read(&path)?)?;
    config.validate().map_err(SceneError::Invalid)?;
    Ok(config)
}

impl SceneConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SceneError> {
        let path = path.as_ref();
        let file: SceneFile = parse_json(path, &read(path)?)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let registry_dir = dir.join(&file.registry);
        let registry = Registry::load_dir(&registry_dir)?;
        let pipeline = load_pipeline_config(&registry_dir)?;
        Self::new(file, registry, pipeline)
    }

    pub fn new(file: SceneFile, registry: Registry, pipeline: PipelineConfig) -> Result<Self, SceneError> {
        let scene = Self {
            file,
            registry,
            pipeline,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn with_noise(mut self, noise: NoiseConfig) -> Result<Self, SceneError> {
        noise.validate()?;
        self.file.noise = noise;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.file.seed = seed;
        self
    }

    pub fn mount(&self, name: &str) -> Option<&Mount> {
        self.file.mounts.iter().find(|m| m.name == name)
    }

    pub fn placement(&self, marker_id: u32) -> Option<&MarkerPlacement> {
        self.file.markers.iter().find(|m| m.id == marker_id)
    }

    fn validate(&self) -> Result<(), SceneError> {
        let f = &self.file;
        f.controller.validate()?;
        f.noise.validate()?;
        let invalid = |m: &str| Err(SceneError::Invalid(m.to_string()));
        if f.cubes.positions.len() != f.stencil.squares.len() {
            return invalid("scene needs as many cubes as stencil squares");
        }
        if !(f.cubes.edge_m > 0.0 && f.stencil.square_edge_m > 0.0) {
            return invalid("cube and square edges must be positive");
        }
        let half = f.cubes.edge_m / 2.0;
        let cage = &f.controller;
        for p in &f.cubes.positions {
            let z = f.table_height_m + half;
            let inside = p[0] >= cage.cage_min.x
                && p[0] <= cage.cage_max.x
                && p[1] >= cage.cage_min.y
                && p[1] <= cage.cage_max.y
                && z >= cage.cage_min.z
                && z <= cage.cage_max.z;
            if !inside {
                return invalid("cubes must start inside the cage");
            }
        }
        let hs = f.stencil.square_edge_m / 2.0;
        for s in &f.stencil.squares {
            if s[0] - hs < f.stencil.sheet_min[0]
                || s[0] + hs > f.stencil.sheet_max[0]
                || s[1] - hs < f.stencil.sheet_min[1]
                || s[1] + hs > f.stencil.sheet_max[1]
            {
                return invalid("stencil squares must lie on the sheet");
            }
        }
        if !cage.contains(&f.end_effector.start) {
            return invalid("end-effector must start inside the cage");
        }
        for m in &f.markers {
            if self.mount(&m.mount).is_none() {
                return Err(SceneError::Invalid(format!("marker {} uses unknown mount `{}`", m.id, m.mount)));
            }
            if self.registry.marker(m.id).is_none() {
                return Err(SceneError::Invalid(format!("marker {} is not in the registry", m.id)));
            }
        }
        for id in self.registry.referenced_markers() {
            if self.placement(id).is_none() {
                return Err(SceneError::Invalid(format!("registry marker {id} has no placement")));
            }
        }
        Ok(())
    }
}
