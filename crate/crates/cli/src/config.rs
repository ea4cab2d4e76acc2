//! JSON scene configuration with strict schema checks.

use crate::error::CliError;
use gelsim_core::calib::{CalibConfig, CalibParams, Optimizer, NU_MAX, NU_MIN};
use gelsim_core::camera::CameraConfig;
use gelsim_optical::{TargetMode, TrainConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

/// A rejected configuration value, located by JSON pointer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub pointer: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = if self.pointer.is_empty() { "/" } else { &self.pointer };
        write!(f, "{at}: {}", self.message)
    }
}

fn check(ok: bool, pointer: &str, message: impl FnOnce() -> String) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError { pointer: pointer.to_string(), message: message() })
    }
}

fn positive(v: f64, pointer: &str) -> Result<(), ConfigError> {
    check(v.is_finite() && v > 0.0, pointer, || format!("must be a finite number > 0, got {v}"))
}

fn non_negative(v: f64, pointer: &str) -> Result<(), ConfigError> {
    check(v.is_finite() && v >= 0.0, pointer, || format!("must be a finite number >= 0, got {v}"))
}

fn range(r: [f64; 2], pointer: &str) -> Result<(), ConfigError> {
    non_negative(r[0], &format!("{pointer}/0"))?;
    non_negative(r[1], &format!("{pointer}/1"))?;
    check(r[0] <= r[1], pointer, || format!("lower bound {} exceeds upper bound {}", r[0], r[1]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialConfig {
    /// Pa
    #[serde(rename = "E")]
    pub youngs: f64,
    pub nu: f64,
    /// kg/m³
    pub density: f64,
    pub friction_mu: f64,
    /// 1/s
    pub damping: f64,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        let m = gelsim_core::mpm::MaterialParams::<f64>::default();
        MaterialConfig {
            youngs: m.youngs,
            nu: m.poisson,
            density: m.density,
            friction_mu: gelsim_core::mpm::DEFAULT_FRICTION,
            damping: m.damping,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub voxel_res_mm: f64,
    /// Room around the gel for bulging; two voxels when unset.
    pub padding_mm: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { voxel_res_mm: gelsim_core::mpm::DEFAULT_VOXEL_RES, padding_mm: None }
    }
}

impl GridConfig {
    pub fn padding(&self) -> f64 {
        self.padding_mm.unwrap_or(2.0 * self.voxel_res_mm)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub fps: f64,
    pub substeps: u32,
    pub softness: f64,
    pub frames: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            fps: gelsim_core::mpm::DEFAULT_FPS,
            substeps: gelsim_core::mpm::DEFAULT_SUBSTEPS,
            softness: gelsim_core::mpm::DEFAULT_SOFTNESS,
            frames: 48,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorConfig {
    pub radius_mm: f64,
    /// Shell thickness; a solid gel when unset.
    pub shell_mm: Option<f64>,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig { radius_mm: 15.0, shell_mm: None }
    }
}

/// Indenter geometry in its local frame, mm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    Sphere {
        radius: f64,
    },
    Box {
        half_extents: [f64; 3],
    },
    Capsule {
        radius: f64,
        half_length: f64,
    },
    Cylinder {
        radius: f64,
        half_length: f64,
    },
    /// OBJ file; the SDF is sampled at `resolution` (half a voxel when unset).
    Mesh {
        path: PathBuf,
        resolution: Option<f64>,
    },
}

/// Straight press along the gel normal at a horizontal offset from the apex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PressSpec {
    pub depth_mm: f64,
    /// Time to go from the start pose to full depth.
    pub duration_s: f64,
    pub offset_mm: [f64; 2],
    /// Clearance between indenter and gel at t = 0.
    pub gap_mm: f64,
    /// Rotation about the press axis, radians.
    pub yaw: f64,
    /// Tilt of the indenter's local z away from the press axis, radians.
    pub tilt: f64,
}

impl Default for PressSpec {
    fn default() -> Self {
        PressSpec { depth_mm: 2.0, duration_s: 0.5, offset_mm: [0.0, 0.0], gap_mm: 0.2, yaw: 0.0, tilt: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySpec {
    /// CSV with columns `t,x,y,z,qw,qx,qy,qz`.
    Path(PathBuf),
    Press(PressSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndenterConfig {
    pub shape: ShapeSpec,
    pub trajectory: TrajectorySpec,
}

impl IndenterConfig {
    /// Reads an indenter file; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let mut ind: IndenterConfig = read_json(path)?;
        ind.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        ind.validate("").map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Ok(ind)
    }

    fn resolve_paths(&mut self, base: &Path) {
        if let ShapeSpec::Mesh { path, .. } = &mut self.shape {
            *path = base.join(&*path);
        }
        if let TrajectorySpec::Path(p) = &mut self.trajectory {
            *p = base.join(&*p);
        }
    }

    fn validate(&self, at: &str) -> Result<(), ConfigError> {
        let s = format!("{at}/shape");
        match &self.shape {
            ShapeSpec::Sphere { radius } => positive(*radius, &format!("{s}/radius"))?,
            ShapeSpec::Box { half_extents } => {
                for (k, v) in half_extents.iter().enumerate() {
                    positive(*v, &format!("{s}/half_extents/{k}"))?;
                }
            }
            ShapeSpec::Capsule { radius, half_length } | ShapeSpec::Cylinder { radius, half_length } => {
                positive(*radius, &format!("{s}/radius"))?;
                positive(*half_length, &format!("{s}/half_length"))?;
            }
            ShapeSpec::Mesh { resolution, .. } => {
                if let Some(r) = resolution {
                    positive(*r, &format!("{s}/resolution"))?;
                }
            }
        }
        if let TrajectorySpec::Press(p) = &self.trajectory {
            let t = format!("{at}/trajectory/press");
            non_negative(p.depth_mm, &format!("{t}/depth_mm"))?;
            positive(p.duration_s, &format!("{t}/duration_s"))?;
            non_negative(p.gap_mm, &format!("{t}/gap_mm"))?;
            for (k, v) in p.offset_mm.iter().enumerate() {
                check(v.is_finite(), &format!("{t}/offset_mm/{k}"), || "must be finite".into())?;
            }
            check(p.yaw.is_finite(), &format!("{t}/yaw"), || "must be finite".into())?;
            check(p.tilt.is_finite(), &format!("{t}/tilt"), || "must be finite".into())?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    /// Particle jitter of the gel fill.
    pub fill: u64,
    /// Marker texture of the synthetic camera.
    pub pattern: u64,
    /// Scene sampling, network initialization, shuffling and metric sampling.
    /// Overridden by `--seed`.
    pub run: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds { fill: 0x5eed, pattern: 1, run: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    #[serde(rename = "init_E")]
    pub init_youngs: f64,
    pub init_nu: f64,
    pub lr: f64,
    pub iters: usize,
    pub optimizer: Optimizer,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        let c = CalibConfig::default();
        CalibrationConfig {
            init_youngs: 3.0 * MaterialConfig::default().youngs,
            init_nu: 0.40,
            lr: c.lr,
            iters: c.iters,
            optimizer: c.optimizer,
        }
    }
}

impl CalibrationConfig {
    pub fn init(&self) -> CalibParams {
        CalibParams::new(self.init_youngs, self.init_nu)
    }

    pub fn optimizer(&self) -> CalibConfig {
        CalibConfig { lr: self.lr, iters: self.iters, optimizer: self.optimizer }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpticalTraining {
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
}

impl Default for OpticalTraining {
    fn default() -> Self {
        let t = TrainConfig::default();
        OpticalTraining { batch_size: t.batch_size, lr: t.lr, weight_decay: t.weight_decay, epochs: t.epochs }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpticalConfig {
    pub mode: TargetMode,
    pub training: OpticalTraining,
}

impl Default for OpticalConfig {
    fn default() -> Self {
        OpticalConfig { mode: TargetMode::Residual, training: OpticalTraining::default() }
    }
}

impl OpticalConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let t = &self.training;
        TrainConfig {
            batch_size: t.batch_size,
            lr: t.lr,
            weight_decay: t.weight_decay,
            epochs: t.epochs,
            seed,
            ..TrainConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogShape {
    Sphere,
    Box,
    Capsule,
    Cylinder,
    Cone,
}

impl CatalogShape {
    pub const ALL: [CatalogShape; 5] =
        [CatalogShape::Sphere, CatalogShape::Box, CatalogShape::Capsule, CatalogShape::Cylinder, CatalogShape::Cone];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub frames: usize,
    pub press_depth_mm: [f64; 2],
    pub press_time_s: [f64; 2],
    pub gap_mm: f64,
    /// Press points lie within this fraction of the radius from the apex axis.
    pub max_offset: f64,
    pub train_fraction: f64,
    /// Reference simulations use this many times the configured substeps.
    pub substep_factor: u32,
    pub shapes: Vec<CatalogShape>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            frames: 12,
            press_depth_mm: [0.5, 3.0],
            press_time_s: [0.15, 0.3],
            gap_mm: 0.3,
            max_offset: 0.4,
            train_fraction: 0.8,
            substep_factor: 2,
            shapes: CatalogShape::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    /// Points sampled from each cloud.
    pub n_points: usize,
    /// Fraction of worst pixels in the significant image error.
    pub image_quantile: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig { n_points: 2048, image_quantile: gelsim_core::metrics::DEFAULT_QUANTILE }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub schema_version: u32,
    pub material: MaterialConfig,
    pub grid: GridConfig,
    pub sim: SimConfig,
    pub sensor: SensorConfig,
    pub indenter: Option<IndenterConfig>,
    pub camera: CameraConfig,
    pub seeds: Seeds,
    pub calibration: CalibrationConfig,
    pub optical: OpticalConfig,
    pub synthetic: SyntheticConfig,
    pub evaluation: EvaluationConfig,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            schema_version: SCHEMA_VERSION,
            material: MaterialConfig::default(),
            grid: GridConfig::default(),
            sim: SimConfig::default(),
            sensor: SensorConfig::default(),
            indenter: None,
            camera: CameraConfig::default(),
            seeds: Seeds::default(),
            calibration: CalibrationConfig::default(),
            optical: OpticalConfig::default(),
            synthetic: SyntheticConfig::default(),
            evaluation: EvaluationConfig::default(),
        }
    }
}

impl SceneConfig {
    /// Parses and validates a config file. Relative paths resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        if !path.is_file() {
            return Err(CliError::Input(format!("config file {} not found", path.display())));
        }
        let mut cfg: SceneConfig = read_json(path)?;
        if let Some(ind) = cfg.indenter.as_mut() {
            ind.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        }
        cfg.validate().map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self, CliError> {
        let cfg: SceneConfig = parse_json(text, "<string>")?;
        cfg.validate().map_err(|e| CliError::Input(e.to_string()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check(self.schema_version == SCHEMA_VERSION, "/schema_version", || {
            format!("unsupported schema version {} (expected {SCHEMA_VERSION})", self.schema_version)
        })?;

        let m = &self.material;
        positive(m.youngs, "/material/E")?;
        check(m.nu.is_finite() && m.nu > -1.0 && m.nu < 0.5, "/material/nu", || {
            format!("must lie in (-1, 0.5), got {}", m.nu)
        })?;
        positive(m.density, "/material/density")?;
        non_negative(m.friction_mu, "/material/friction_mu")?;
        non_negative(m.damping, "/material/damping")?;

        positive(self.grid.voxel_res_mm, "/grid/voxel_res_mm")?;
        if let Some(p) = self.grid.padding_mm {
            non_negative(p, "/grid/padding_mm")?;
        }

        positive(self.sim.fps, "/sim/fps")?;
        check(self.sim.substeps > 0, "/sim/substeps", || "must be >= 1".into())?;
        positive(self.sim.softness, "/sim/softness")?;
        check(self.sim.frames > 0, "/sim/frames", || "must be >= 1".into())?;

        let r = self.sensor.radius_mm;
        positive(r, "/sensor/radius_mm")?;
        check(r >= 2.0 * self.grid.voxel_res_mm, "/sensor/radius_mm", || {
            format!("radius {r} mm is smaller than two voxels")
        })?;
        if let Some(s) = self.sensor.shell_mm {
            check(s.is_finite() && s > 0.0 && s < r, "/sensor/shell_mm", || format!("must lie in (0, {r}), got {s}"))?;
        }

        if let Some(ind) = &self.indenter {
            ind.validate("/indenter")?;
        }
        self.camera.validate().map_err(|e| ConfigError { pointer: "/camera".into(), message: e.to_string() })?;

        let c = &self.calibration;
        positive(c.init_youngs, "/calibration/init_E")?;
        check((NU_MIN..=NU_MAX).contains(&c.init_nu), "/calibration/init_nu", || {
            format!("must lie in [{NU_MIN}, {NU_MAX}], got {}", c.init_nu)
        })?;
        positive(c.lr, "/calibration/lr")?;
        check(c.iters > 0, "/calibration/iters", || "must be >= 1".into())?;

        let t = &self.optical.training;
        check(t.batch_size > 0, "/optical/training/batch_size", || "must be >= 1".into())?;
        check(t.epochs > 0, "/optical/training/epochs", || "must be >= 1".into())?;
        positive(t.lr, "/optical/training/lr")?;
        non_negative(t.weight_decay, "/optical/training/weight_decay")?;

        let s = &self.synthetic;
        check(s.frames > 0, "/synthetic/frames", || "must be >= 1".into())?;
        range(s.press_depth_mm, "/synthetic/press_depth_mm")?;
        range(s.press_time_s, "/synthetic/press_time_s")?;
        positive(s.press_time_s[0], "/synthetic/press_time_s/0")?;
        non_negative(s.gap_mm, "/synthetic/gap_mm")?;
        check((0.0..1.0).contains(&s.max_offset), "/synthetic/max_offset", || {
            format!("must lie in [0, 1), got {}", s.max_offset)
        })?;
        check((0.0..=1.0).contains(&s.train_fraction), "/synthetic/train_fraction", || {
            format!("must lie in [0, 1], got {}", s.train_fraction)
        })?;
        check(s.substep_factor > 0, "/synthetic/substep_factor", || "must be >= 1".into())?;
        check(!s.shapes.is_empty(), "/synthetic/shapes", || "needs at least one shape".into())?;

        let e = &self.evaluation;
        check(e.n_points > 0, "/evaluation/n_points", || "must be >= 1".into())?;
        check(e.image_quantile > 0.0 && e.image_quantile <= 1.0, "/evaluation/image_quantile", || {
            format!("must lie in (0, 1], got {}", e.image_quantile)
        })?;
        Ok(())
    }
}

/// Reads a JSON file, reporting parse errors with line, column and JSON pointer.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_json(&text, &path.display().to_string())
}

fn parse_json<T: DeserializeOwned>(text: &str, source: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = json_pointer(e.path());
        let inner = e.inner();
        CliError::Input(format!(
            "{source}:{}:{}: {}: {inner}",
            inner.line(),
            inner.column(),
            if pointer.is_empty() { "/" } else { &pointer }
        ))
    })
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => {}
        }
    }
    out
}

/// Writes pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
    text.push('\n');
    crate::write_file(path, text.as_bytes())
}
