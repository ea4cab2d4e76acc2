use crate::config::{write_json, CatalogShape, IndenterConfig, PressSpec, SceneConfig, ShapeSpec, TrajectorySpec};
use crate::dataset::{frame_stem, Manifest, Role, SceneEntry, Status, FRAMES_DIR, IDLE, MANIFEST, SEQUENCES_DIR};
use crate::error::CliError;
use crate::scene::{build_shape, gel_particles, press_trajectory, rollout, template, with_contact, RestView};
use crate::SCHEMA_VERSION;
use gelsim_core::camera::TactileGeometryFrame;
use gelsim_core::geometry::{
    save_mesh, save_trajectory, save_xyz, IndenterShape, MeshSdf, PointCloud, Trajectory, TriMesh,
};
use gelsim_core::image::{write_ppm, RgbImage};
use gelsim_core::linalg::Vec3;
use gelsim_core::mpm::{surface_points, IndenterState, SimState};
use gelsim_optical::synth_shade;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::{FRAC_PI_2, TAU};
use std::path::Path;

const CONE_SEGMENTS: usize = 24;
const MESH_FILE: &str = "indenter.obj";

/// Randomized parameters of one scene.
struct ScenePlan {
    id: String,
    role: Role,
    kind: CatalogShape,
    spec: ShapeSpec,
    /// The cone's mesh, written next to the indenter file.
    mesh: Option<TriMesh>,
    press: PressSpec,
}

struct SceneFrames {
    trajectory: Trajectory,
    frames: Vec<(TactileGeometryFrame, RgbImage, PointCloud)>,
}

/// Upside-down cone centred on its mid-height, tip along −z.
fn cone(radius: f64, height: f64) -> TriMesh {
    let mut m = TriMesh::cone(radius, height, CONE_SEGMENTS);
    for v in m.vertices.iter_mut() {
        *v = Vec3::new(v.x, -v.y, 0.5 * height - v.z);
    }
    m
}

/// Catalog dimensions scale with the gel radius.
fn catalog_shape(kind: CatalogShape, r: f64, voxel: f64) -> (ShapeSpec, Option<TriMesh>) {
    match kind {
        CatalogShape::Sphere => (ShapeSpec::Sphere { radius: 0.4 * r }, None),
        CatalogShape::Box => (ShapeSpec::Box { half_extents: [0.3 * r, 0.25 * r, 0.25 * r] }, None),
        CatalogShape::Capsule => (ShapeSpec::Capsule { radius: 0.2 * r, half_length: 0.25 * r }, None),
        CatalogShape::Cylinder => (ShapeSpec::Cylinder { radius: 0.25 * r, half_length: 0.3 * r }, None),
        CatalogShape::Cone => {
            (ShapeSpec::Mesh { path: MESH_FILE.into(), resolution: Some(0.5 * voxel) }, Some(cone(0.3 * r, 0.6 * r)))
        }
    }
}

fn kind_name(kind: CatalogShape) -> &'static str {
    match kind {
        CatalogShape::Sphere => "sphere",
        CatalogShape::Box => "box",
        CatalogShape::Capsule => "capsule",
        CatalogShape::Cylinder => "cylinder",
        CatalogShape::Cone => "cone",
    }
}

/// Draws every scene's parameters and the train/eval split from one seeded stream.
fn plan(cfg: &SceneConfig, n: usize) -> Vec<ScenePlan> {
    let s = &cfg.synthetic;
    let r = cfg.sensor.radius_mm;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seeds.run);
    let uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| if hi > lo { rng.gen_range(lo..hi) } else { lo };
    let mut plans: Vec<ScenePlan> = (0..n)
        .map(|i| {
            let kind = s.shapes[rng.gen_range(0..s.shapes.len())];
            let (spec, mesh) = catalog_shape(kind, r, cfg.grid.voxel_res_mm);
            let rho = s.max_offset * r * rng.gen::<f64>().sqrt();
            let phi = rng.gen_range(0.0..TAU);
            let yaw = rng.gen_range(0.0..TAU);
            let tilt = match kind {
                CatalogShape::Capsule | CatalogShape::Cylinder => rng.gen_range(0.0..FRAC_PI_2),
                _ => 0.0,
            };
            let press = PressSpec {
                depth_mm: uniform(&mut rng, s.press_depth_mm[0], s.press_depth_mm[1]),
                duration_s: uniform(&mut rng, s.press_time_s[0], s.press_time_s[1]),
                offset_mm: [rho * phi.cos(), rho * phi.sin()],
                gap_mm: s.gap_mm,
                yaw,
                tilt,
            };
            ScenePlan { id: format!("scene_{i:03}"), role: Role::Eval, kind, spec, mesh, press }
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_train = (s.train_fraction * n as f64).round() as usize;
    for &i in &order[..n_train] {
        plans[i].role = Role::Train;
    }
    plans
}

fn simulate_scene(
    cfg: &SceneConfig,
    base: &SimState<f64>,
    view: &RestView,
    p: &ScenePlan,
) -> Result<SceneFrames, CliError> {
    let shape = match &p.mesh {
        Some(m) => {
            let res = match p.spec {
                ShapeSpec::Mesh { resolution: Some(r), .. } => r,
                _ => 0.5 * cfg.grid.voxel_res_mm,
            };
            IndenterShape::MeshSdf(Box::new(MeshSdf::build(m.clone(), res)?))
        }
        None => build_shape(&p.spec, cfg.grid.voxel_res_mm)?,
    };
    let trajectory = press_trajectory(cfg.sensor.radius_mm, &shape, &p.press)?;
    let mut state = base.clone();
    state.indenter = Some(with_contact(cfg, IndenterState::new(shape, trajectory.clone())?)?);
    let (lo, hi) = (state.grid.origin, state.grid.upper());
    let mut frames = Vec::with_capacity(cfg.synthetic.frames);
    rollout(&mut state, cfg.synthetic.frames, |k, st| {
        let cloud = surface_points(&st.particles)?;
        let inside = cloud.points.iter().all(|q| (0..3).all(|a| q[a] >= lo[a] && q[a] <= hi[a]));
        if cloud.is_empty() || !inside {
            return Err(CliError::Numeric(format!("frame {k}: target cloud leaves the grid")));
        }
        let maps = view.render(cfg, &st.particles)?;
        let real = synth_shade(&maps, &view.pattern)?;
        frames.push((maps, real, cloud));
        Ok(())
    })?;
    Ok(SceneFrames { trajectory, frames })
}

/// Generates `n` random indentation scenes under `out`. Reference rollouts run at
/// `synthetic.substep_factor` times the configured substeps; scenes whose
/// simulation fails are skipped and recorded as such in the manifest.
pub fn run(cfg: &SceneConfig, n: usize, out: &Path) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::Input("--scenes must be >= 1".into()));
    }
    let rest = gel_particles(cfg)?;
    let view = RestView::new(cfg, &rest)?;
    let substeps = cfg.sim.substeps * cfg.synthetic.substep_factor;
    let base = template(cfg, rest, substeps)?;
    let plans = plan(cfg, n);
    let results: Vec<Result<SceneFrames, CliError>> =
        plans.par_iter().map(|p| simulate_scene(cfg, &base, &view, p)).collect();

    crate::create_dir(out)?;
    write_json(&out.join("config.json"), cfg)?;
    write_ppm(&out.join(IDLE), &view.idle)?;
    write_ppm(&out.join("pattern.ppm"), &view.pattern)?;
    view.maps.write(out, "idle")?;

    let frames_dir = out.join(FRAMES_DIR);
    let mut next = 0;
    let mut entries = Vec::with_capacity(n);
    for (p, res) in plans.iter().zip(results) {
        let mut entry = SceneEntry {
            id: p.id.clone(),
            role: p.role,
            status: Status::Ok,
            config: None,
            shape: kind_name(p.kind).to_string(),
            press_depth_mm: p.press.depth_mm,
            frames: Vec::new(),
            skip_reason: None,
        };
        match res {
            Err(e) if !matches!(e, CliError::Io(_)) => {
                log::warn!("skipping {}: {e}", p.id);
                entry.status = Status::Skipped;
                entry.skip_reason = Some(e.to_string());
            }
            Err(e) => return Err(e),
            Ok(scene) => {
                let rel = format!("{SEQUENCES_DIR}/{}", p.id);
                let dir = out.join(&rel);
                let ind =
                    IndenterConfig { shape: p.spec.clone(), trajectory: TrajectorySpec::Path("trajectory.csv".into()) };
                write_json(&dir.join("indenter.json"), &ind)?;
                save_trajectory(&scene.trajectory, dir.join("trajectory.csv"))?;
                crate::create_dir(&dir.join("targets"))?;
                crate::create_dir(&frames_dir)?;
                if let Some(m) = &p.mesh {
                    save_mesh(m, dir.join(MESH_FILE))?;
                }
                for (k, (maps, real, cloud)) in scene.frames.iter().enumerate() {
                    save_xyz(cloud, dir.join("targets").join(format!("{}.xyz", frame_stem(k))))?;
                    let stem = frame_stem(next);
                    maps.write(&frames_dir, &stem)?;
                    write_ppm(&frames_dir.join(format!("{stem}.ppm")), real)?;
                    save_xyz(cloud, frames_dir.join(format!("{stem}.xyz")))?;
                    entry.frames.push(next);
                    next += 1;
                }
                entry.config = Some(format!("{rel}/indenter.json"));
            }
        }
        entries.push(entry);
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        seed: cfg.seeds.run,
        split_seed: cfg.seeds.run,
        train_fraction: cfg.synthetic.train_fraction,
        frames_per_scene: cfg.synthetic.frames,
        substeps,
        camera: cfg.camera,
        scenes: entries,
    };
    write_json(&out.join(MANIFEST), &manifest)?;
    let ok = manifest.scenes(None).count();
    log::info!("generated {ok} of {n} scenes, {next} frames");
    if ok == 0 {
        return Err(CliError::Numeric(format!("all {n} scenes failed to simulate")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_follows_the_train_fraction() {
        let cfg = SceneConfig::default();
        let plans = plan(&cfg, 10);
        assert_eq!(plans.iter().filter(|p| p.role == Role::Train).count(), 8);
        let again = plan(&cfg, 10);
        for (a, b) in plans.iter().zip(&again) {
            assert_eq!((a.role, a.kind, a.press.depth_mm), (b.role, b.kind, b.press.depth_mm));
        }
    }

    #[test]
    fn sampled_presses_stay_in_range() {
        let mut cfg = SceneConfig::default();
        cfg.seeds.run = 17;
        let r = cfg.sensor.radius_mm;
        for p in plan(&cfg, 40) {
            let s = &cfg.synthetic;
            assert!((s.press_depth_mm[0]..=s.press_depth_mm[1]).contains(&p.press.depth_mm));
            assert!((s.press_time_s[0]..=s.press_time_s[1]).contains(&p.press.duration_s));
            assert!(p.press.offset_mm[0].hypot(p.press.offset_mm[1]) <= s.max_offset * r);
            assert_eq!(p.mesh.is_some(), p.kind == CatalogShape::Cone);
        }
    }

    #[test]
    fn cone_points_down_and_is_centred() {
        let m = cone(2.0, 4.0);
        let zmin = m.vertices.iter().map(|v| v.z).fold(f64::INFINITY, f64::min);
        let zmax = m.vertices.iter().map(|v| v.z).fold(f64::NEG_INFINITY, f64::max);
        assert!((zmin + 2.0).abs() < 1e-12 && (zmax - 2.0).abs() < 1e-12);
        let tip: Vec<_> = m.vertices.iter().filter(|v| (v.z - zmin).abs() < 1e-12).collect();
        assert_eq!(tip.len(), 1);
        assert!(tip[0].x.abs() < 1e-12 && tip[0].y.abs() < 1e-12);
    }
}
