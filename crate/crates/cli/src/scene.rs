//! Simulation objects built from a [`SceneConfig`].

use crate::config::{IndenterConfig, PressSpec, SceneConfig, ShapeSpec, TrajectorySpec};
use crate::error::CliError;
use gelsim_core::camera::{build_surface_mesh, render_maps, SurfaceMesh, TactileGeometryFrame};
use gelsim_core::geometry::{
    fill_hemisphere_particles, load_mesh, load_trajectory, HemisphereFill, IndenterShape, MeshSdf, Trajectory,
    TrajectorySample,
};
use gelsim_core::image::RgbImage;
use gelsim_core::linalg::{Quat, Vec3};
use gelsim_core::mpm::{sensor_grid, IndenterState, MaterialParams, ParticleSet, SimState};
use gelsim_optical::{marker_pattern, synth_shade};

pub fn gel_particles(cfg: &SceneConfig) -> Result<ParticleSet<f64>, CliError> {
    let mut fill = HemisphereFill::new(cfg.sensor.radius_mm, cfg.grid.voxel_res_mm, cfg.material.density);
    fill.shell = cfg.sensor.shell_mm;
    fill.seed = cfg.seeds.fill;
    Ok(fill_hemisphere_particles(&fill)?)
}

pub fn material(cfg: &SceneConfig, youngs: f64, nu: f64) -> MaterialParams<f64> {
    let mut m = MaterialParams::new(youngs, nu);
    m.density = cfg.material.density;
    m.damping = cfg.material.damping;
    m
}

/// Gel at rest without an indenter, stepping at `substeps` per frame.
pub fn template(cfg: &SceneConfig, particles: ParticleSet<f64>, substeps: u32) -> Result<SimState<f64>, CliError> {
    let grid = sensor_grid(cfg.sensor.radius_mm, cfg.grid.voxel_res_mm, cfg.grid.padding())?;
    let mat = material(cfg, cfg.material.youngs, cfg.material.nu);
    Ok(SimState::new(particles, grid, None, mat, cfg.sim.fps, substeps)?)
}

pub fn build_shape(spec: &ShapeSpec, voxel_res: f64) -> Result<IndenterShape, CliError> {
    Ok(match spec {
        ShapeSpec::Sphere { radius } => IndenterShape::Sphere { radius: *radius },
        ShapeSpec::Box { half_extents } => IndenterShape::Box { half_extents: *half_extents },
        ShapeSpec::Capsule { radius, half_length } => {
            IndenterShape::Capsule { radius: *radius, half_length: *half_length }
        }
        ShapeSpec::Cylinder { radius, half_length } => {
            IndenterShape::Cylinder { radius: *radius, half_length: *half_length }
        }
        ShapeSpec::Mesh { path, resolution } => {
            let mesh = load_mesh(path)?;
            IndenterShape::MeshSdf(Box::new(MeshSdf::build(mesh, resolution.unwrap_or(0.5 * voxel_res))?))
        }
    })
}

/// Largest extent of the shape along the local unit direction `d`.
pub fn support(shape: &IndenterShape, d: Vec3<f64>) -> f64 {
    match shape {
        IndenterShape::Sphere { radius } => *radius,
        IndenterShape::Box { half_extents } => (0..3).map(|k| d[k].abs() * half_extents[k]).sum(),
        IndenterShape::Capsule { radius, half_length } => radius + half_length * d.z.abs(),
        IndenterShape::Cylinder { radius, half_length } => radius * d.x.hypot(d.y) + half_length * d.z.abs(),
        IndenterShape::MeshSdf(m) => m.mesh().vertices.iter().map(|v| v.dot(d)).fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Rotation taking +z onto the unit vector `n`.
fn align_z(n: Vec3<f64>) -> Quat {
    let axis = Vec3::new(0.0, 0.0, 1.0).cross(n);
    let s = axis.norm();
    if s < 1e-12 {
        return if n.z > 0.0 {
            Quat::IDENTITY
        } else {
            Quat::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), std::f64::consts::PI)
        };
    }
    Quat::from_axis_angle(axis * (1.0 / s), s.atan2(n.z))
}

/// Two-sample trajectory pressing along the gel normal at the offset point:
/// the indenter starts `gap_mm` clear of the undeformed surface and ends
/// `depth_mm` past it, then holds.
pub fn press_trajectory(radius: f64, shape: &IndenterShape, p: &PressSpec) -> Result<Trajectory, CliError> {
    let [x, y] = p.offset_mm;
    let r2 = x * x + y * y;
    if r2 >= radius * radius {
        return Err(CliError::Input(format!("press offset ({x}, {y}) lies outside the gel of radius {radius}")));
    }
    let surf = Vec3::new(x, y, (radius * radius - r2).sqrt());
    let n = surf * (1.0 / radius);
    let orientation = align_z(n)
        .mul(&Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), p.yaw))
        .mul(&Quat::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), p.tilt))
        .normalized();
    let reach = support(shape, orientation.conjugate().rotate(-n));
    let sample = |t: f64, h: f64| TrajectorySample { t, position: surf + n * h, orientation };
    Ok(Trajectory::new(vec![sample(0.0, reach + p.gap_mm), sample(p.duration_s, reach - p.depth_mm)])?)
}

pub fn build_trajectory(ind: &IndenterConfig, shape: &IndenterShape, radius: f64) -> Result<Trajectory, CliError> {
    match &ind.trajectory {
        TrajectorySpec::Path(path) => Ok(load_trajectory(path)?),
        TrajectorySpec::Press(p) => press_trajectory(radius, shape, p),
    }
}

pub fn indenter_state(cfg: &SceneConfig, ind: &IndenterConfig) -> Result<IndenterState, CliError> {
    let shape = build_shape(&ind.shape, cfg.grid.voxel_res_mm)?;
    let traj = build_trajectory(ind, &shape, cfg.sensor.radius_mm)?;
    with_contact(cfg, IndenterState::new(shape, traj)?)
}

/// Applies the configured friction and softness.
pub fn with_contact(cfg: &SceneConfig, mut ind: IndenterState) -> Result<IndenterState, CliError> {
    ind.friction = cfg.material.friction_mu;
    ind.softness = cfg.sim.softness;
    ind.validate()?;
    Ok(ind)
}

/// Advances `frames` frames, calling `on_frame(k, state)` after frame `k`.
/// Errors name the frame.
pub fn rollout(
    state: &mut SimState<f64>,
    frames: usize,
    mut on_frame: impl FnMut(usize, &SimState<f64>) -> Result<(), CliError>,
) -> Result<(), CliError> {
    for k in 0..frames {
        state.step_frame().map_err(|e| CliError::from(e).context(format_args!("frame {k}")))?;
        on_frame(k, state)?;
    }
    Ok(())
}

/// The undeformed gel as seen by the camera.
pub struct RestView {
    pub mesh: SurfaceMesh,
    pub maps: TactileGeometryFrame,
    pub pattern: RgbImage,
    /// Synthetic camera image of the contact-free gel.
    pub idle: RgbImage,
}

impl RestView {
    pub fn new(cfg: &SceneConfig, rest: &ParticleSet<f64>) -> Result<Self, CliError> {
        let mesh = build_surface_mesh(rest, cfg.sensor.radius_mm)?;
        let maps = render_maps(&mesh, &cfg.camera)?;
        let pattern = marker_pattern(cfg.camera.width, cfg.camera.height, cfg.seeds.pattern);
        let idle = synth_shade(&maps, &pattern)?;
        Ok(RestView { mesh, maps, pattern, idle })
    }

    pub fn render(&self, cfg: &SceneConfig, particles: &ParticleSet<f64>) -> Result<TactileGeometryFrame, CliError> {
        Ok(render_maps(&self.mesh.posed(particles)?, &cfg.camera)?)
    }
}
