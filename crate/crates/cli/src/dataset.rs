//! Synthetic dataset layout.
//!
//! ```text
//! manifest.json
//! config.json                 resolved generator configuration
//! idle.ppm  pattern.ppm
//! frames/NNNN.pfm             depth map
//! frames/NNNN.normal.ppm      normal map
//! frames/NNNN.mask.pbm        valid-pixel mask
//! frames/NNNN.ppm             synthetic camera image
//! frames/NNNN.xyz             surface cloud
//! sequences/<scene>/indenter.json, trajectory.csv, targets/FFFF.xyz
//! ```

use crate::config::{read_json, IndenterConfig};
use crate::error::CliError;
use gelsim_core::camera::{CameraConfig, TactileGeometryFrame};
use gelsim_core::geometry::{load_xyz, PointCloud};
use gelsim_core::image::{read_ppm, RgbImage};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const MANIFEST: &str = "manifest.json";
pub const FRAMES_DIR: &str = "frames";
pub const SEQUENCES_DIR: &str = "sequences";
pub const IDLE: &str = "idle.ppm";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Train,
    Eval,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneEntry {
    pub id: String,
    pub role: Role,
    pub status: Status,
    /// Indenter file of the scene, relative to the dataset root.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config: Option<String>,
    pub shape: String,
    pub press_depth_mm: f64,
    /// Global frame numbers, in simulation order.
    pub frames: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub skip_reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub seed: u64,
    pub split_seed: u64,
    pub train_fraction: f64,
    pub frames_per_scene: usize,
    pub substeps: u32,
    pub camera: CameraConfig,
    pub scenes: Vec<SceneEntry>,
}

impl Manifest {
    pub fn load(root: &Path) -> Result<Self, CliError> {
        let path = root.join(MANIFEST);
        if !path.is_file() {
            return Err(CliError::Input(format!("{} has no {MANIFEST}", root.display())));
        }
        read_json(&path)
    }

    /// Completed scenes, optionally restricted to one role.
    pub fn scenes(&self, role: Option<Role>) -> impl Iterator<Item = &SceneEntry> {
        self.scenes.iter().filter(move |s| s.status == Status::Ok && role.is_none_or(|r| s.role == r))
    }

    pub fn frames(&self, role: Option<Role>) -> Vec<usize> {
        self.scenes(role).flat_map(|s| s.frames.iter().copied()).collect()
    }
}

pub fn frame_stem(k: usize) -> String {
    format!("{k:04}")
}

/// Frame numbers of the `NNNN.ppm` images in `dir/frames`, sorted.
pub fn list_frames(root: &Path) -> Result<Vec<usize>, CliError> {
    let dir = root.join(FRAMES_DIR);
    let entries = std::fs::read_dir(&dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
    let mut out = Vec::new();
    for e in entries {
        let name = e.map_err(|e| CliError::io(&dir, e))?.file_name();
        let name = name.to_string_lossy();
        if let Some(stem) = name.strip_suffix(".ppm") {
            if stem.len() == 4 {
                if let Ok(k) = stem.parse() {
                    out.push(k);
                }
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

pub fn read_image(root: &Path, k: usize) -> Result<RgbImage, CliError> {
    Ok(read_ppm(&root.join(FRAMES_DIR).join(format!("{}.ppm", frame_stem(k))))?)
}

pub fn cloud_path(root: &Path, k: usize) -> PathBuf {
    root.join(FRAMES_DIR).join(format!("{}.xyz", frame_stem(k)))
}

pub fn read_maps(root: &Path, k: usize, camera: &CameraConfig) -> Result<TactileGeometryFrame, CliError> {
    Ok(TactileGeometryFrame::read(&root.join(FRAMES_DIR), &frame_stem(k), camera.max_depth)?)
}

pub fn read_idle(root: &Path) -> Result<RgbImage, CliError> {
    let path = root.join(IDLE);
    if !path.is_file() {
        return Err(CliError::Input(format!("missing idle frame {}", path.display())));
    }
    Ok(read_ppm(&path)?)
}

/// One recorded indentation: indenter file plus `targets/FFFF.xyz` clouds.
pub struct SequenceDir {
    pub name: String,
    pub indenter: IndenterConfig,
    pub targets: Vec<(usize, PointCloud)>,
}

impl SequenceDir {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let indenter = IndenterConfig::load(&dir.join("indenter.json"))?;
        let tdir = dir.join("targets");
        let mut targets = Vec::new();
        if tdir.is_dir() {
            let mut files: Vec<(usize, PathBuf)> = Vec::new();
            for e in std::fs::read_dir(&tdir).map_err(|e| CliError::io(&tdir, e))? {
                let path = e.map_err(|e| CliError::io(&tdir, e))?.path();
                let idx = path
                    .file_name()
                    .and_then(|n| n.to_str())
                    .and_then(|n| n.strip_suffix(".xyz"))
                    .and_then(|s| s.parse::<usize>().ok());
                if let Some(k) = idx {
                    files.push((k, path));
                }
            }
            files.sort();
            for (k, path) in files {
                targets.push((k, load_xyz(&path)?));
            }
        }
        if targets.is_empty() {
            return Err(CliError::Input(format!("sequence {name}: no target clouds in {}", tdir.display())));
        }
        Ok(SequenceDir { name, indenter, targets })
    }
}

/// Subdirectories of `root` holding an `indenter.json`, sorted by name.
pub fn sequence_dirs(root: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(root).map_err(|e| CliError::Input(format!("{}: {e}", root.display())))?;
    let mut dirs: Vec<PathBuf> = Vec::new();
    for e in entries {
        let p = e.map_err(|e| CliError::io(root, e))?.path();
        if p.join("indenter.json").is_file() {
            dirs.push(p);
        }
    }
    dirs.sort();
    Ok(dirs)
}
