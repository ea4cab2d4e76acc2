use super::calibrate::read_result;
use super::predict_image;
use crate::config::{write_json, IndenterConfig, SceneConfig};
use crate::dataset::{frame_stem, read_idle, Manifest, Role, FRAMES_DIR};
use crate::error::CliError;
use crate::scene::{gel_particles, indenter_state, material, rollout, template, RestView};
use crate::SCHEMA_VERSION;
use gelsim_core::camera::TactileGeometryFrame;
use gelsim_core::geometry::{save_xyz, PointCloud};
use gelsim_core::image::{write_ppm, RgbImage};
use gelsim_core::mpm::surface_points;
use gelsim_optical::weights::load_weights;
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;

#[derive(Debug, Serialize)]
struct RenderSummary {
    schema_version: u32,
    #[serde(rename = "E")]
    youngs: f64,
    nu: f64,
    split: Option<Role>,
    frames: Vec<usize>,
}

type Frame = (usize, TactileGeometryFrame, RgbImage, PointCloud);

/// Re-simulates the dataset's scenes at the configured substeps (with the
/// calibrated material when given) and writes predicted `frames/NNNN.{ppm,xyz}`
/// plus the rendered maps, numbered like the dataset.
pub fn run(
    cfg: &SceneConfig,
    dataset: &Path,
    weights: &Path,
    calibration: Option<&Path>,
    split: Option<Role>,
    out: &Path,
) -> Result<(), CliError> {
    let manifest = Manifest::load(dataset)?;
    let idle = read_idle(dataset)?;
    let net = load_weights::<f32>(weights)?;
    let mut cfg = cfg.clone();
    cfg.camera = manifest.camera;
    let (youngs, nu) = match calibration {
        Some(p) => {
            let r = read_result(p)?;
            (r.youngs, r.nu)
        }
        None => (cfg.material.youngs, cfg.material.nu),
    };
    let rest = gel_particles(&cfg)?;
    let view = RestView::new(&cfg, &rest)?;
    let mut base = template(&cfg, rest, cfg.sim.substeps)?;
    base.material = material(&cfg, youngs, nu);
    let scenes: Vec<_> = manifest.scenes(split).collect();

    let rendered: Vec<Vec<Frame>> = scenes
        .par_iter()
        .map(|scene| {
            let rel = scene
                .config
                .as_deref()
                .ok_or_else(|| CliError::Input(format!("scene {} has no indenter file", scene.id)))?;
            let ind = IndenterConfig::load(&dataset.join(rel))?;
            let mut state = base.clone();
            state.indenter = Some(indenter_state(&cfg, &ind)?);
            let mut frames = Vec::with_capacity(scene.frames.len());
            rollout(&mut state, scene.frames.len(), |k, st| {
                let maps = view.render(&cfg, &st.particles)?;
                let img = predict_image(&net, cfg.optical.mode, &maps, &idle)?;
                frames.push((scene.frames[k], maps, img, surface_points(&st.particles)?));
                Ok(())
            })
            .map_err(|e| e.context(format_args!("scene {}", scene.id)))?;
            Ok(frames)
        })
        .collect::<Result<_, CliError>>()?;

    let dir = out.join(FRAMES_DIR);
    crate::create_dir(&dir)?;
    let mut numbers = Vec::new();
    for (k, maps, img, cloud) in rendered.iter().flatten() {
        let stem = frame_stem(*k);
        maps.write(&dir, &stem)?;
        write_ppm(&dir.join(format!("{stem}.ppm")), img)?;
        save_xyz(cloud, dir.join(format!("{stem}.xyz")))?;
        numbers.push(*k);
    }
    crate::create_dir(out)?;
    write_json(
        &out.join("render.json"),
        &RenderSummary { schema_version: SCHEMA_VERSION, youngs, nu, split, frames: numbers },
    )
}
