use super::predict_image;
use crate::config::{write_json, SceneConfig};
use crate::dataset::frame_stem;
use crate::error::CliError;
use crate::scene::{gel_particles, indenter_state, template, RestView};
use crate::SCHEMA_VERSION;
use gelsim_core::geometry::save_xyz;
use gelsim_core::image::{read_ppm, write_ppm};
use gelsim_core::mpm::surface_points;
use gelsim_optical::weights::load_weights;
use serde::Serialize;
use std::path::Path;
use std::time::{Duration, Instant};

#[derive(Debug, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub frames: usize,
    pub substeps: u32,
    /// Time spent stepping the simulation, excluding rendering and file output.
    pub wall_clock_s: f64,
    pub fps_achieved: f64,
    /// Largest surface-particle displacement over all frames.
    pub max_displacement_mm: f64,
}

/// Writes `clouds/NNNN.xyz`, `maps/NNNN.{pfm,normal.ppm,mask.pbm}`, optionally
/// `images/NNNN.ppm`, and `summary.json`.
pub fn run(cfg: &SceneConfig, out: &Path, weights: Option<&Path>, idle: Option<&Path>) -> Result<(), CliError> {
    let ind =
        cfg.indenter.as_ref().ok_or_else(|| CliError::Input("/indenter: the configuration has no indenter".into()))?;
    let rest = gel_particles(cfg)?;
    let view = RestView::new(cfg, &rest)?;
    let net = weights.map(load_weights::<f32>).transpose()?;
    let idle = match idle {
        Some(p) => read_ppm(p)?,
        None => view.idle.clone(),
    };
    let surface = rest.surface_indices();
    let mut state = template(cfg, rest.clone(), cfg.sim.substeps)?;
    state.indenter = Some(indenter_state(cfg, ind)?);

    crate::create_dir(&out.join("clouds"))?;
    let mut busy = Duration::ZERO;
    let mut max_disp = 0.0f64;
    for k in 0..cfg.sim.frames {
        let t0 = Instant::now();
        state.step_frame().map_err(|e| CliError::from(e).context(format_args!("frame {k}")))?;
        busy += t0.elapsed();

        let p = &state.particles;
        for &i in &surface {
            max_disp = max_disp.max((p.x[i] - rest.x[i]).norm());
        }
        let stem = frame_stem(k);
        save_xyz(&surface_points(p)?, out.join("clouds").join(format!("{stem}.xyz")))?;
        let maps = view.render(cfg, p)?;
        maps.write(&out.join("maps"), &stem)?;
        if let Some(net) = &net {
            let img = predict_image(net, cfg.optical.mode, &maps, &idle)?;
            write_ppm(&out.join("images").join(format!("{stem}.ppm")), &img)?;
        }
        log::info!("frame {k}: max displacement {max_disp:.4} mm");
    }
    let secs = busy.as_secs_f64();
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        frames: cfg.sim.frames,
        substeps: cfg.sim.substeps,
        wall_clock_s: secs,
        fps_achieved: cfg.sim.frames as f64 / secs.max(1e-9),
        max_displacement_mm: max_disp,
    };
    write_json(&out.join("summary.json"), &summary)
}
