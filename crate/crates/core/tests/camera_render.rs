use gelsim_core::camera::*;
use gelsim_core::geometry::{fill_hemisphere_particles, HemisphereFill, IndenterShape, Trajectory};
use gelsim_core::linalg::Vec3;
use gelsim_core::mpm::{sensor_grid, IndenterState, MaterialParams, ParticleSet, SimState};

const H: f64 = 1.2;

fn gel(radius: f64) -> ParticleSet<f64> {
    fill_hemisphere_particles(&HemisphereFill::new(radius, H, 2.0e6)).unwrap()
}

fn check_frame_invariants(frame: &TactileGeometryFrame, cfg: &CameraConfig) {
    for k in 0..frame.width * frame.height {
        if frame.valid[k] {
            let ray = pixel_to_ray(k % cfg.width, k / cfg.width, cfg).unwrap();
            assert!(frame.depth[k] > 0.0 && frame.depth[k] <= cfg.max_depth);
            assert!((frame.normal[k].norm() - 1.0).abs() <= 1e-6);
            assert!(frame.normal[k].dot(ray) < 0.0, "pixel {k} normal faces away");
        } else {
            assert_eq!(frame.depth[k], cfg.max_depth);
            assert_eq!(frame.normal[k], MISS_NORMAL);
        }
    }
}

#[test]
fn undeformed_hemisphere_renders_at_its_radius() {
    let radius = 8.0;
    let p = gel(radius);
    let mesh = build_surface_mesh(&p, radius).unwrap();
    assert_eq!(mesh.vertices.len(), p.surface_indices().len());
    assert_eq!(mesh.euler_characteristic(), 1);
    for normals in [NormalMode::Flat, NormalMode::Smooth] {
        let cfg = CameraConfig { normals, ..Default::default() };
        let frame = render_maps(&mesh, &cfg).unwrap();
        check_frame_invariants(&frame, &cfg);
        // Rays near the horizon graze the rim; the bulk of the disc must hit.
        assert!(frame.valid_count() as f64 > 0.7 * std::f64::consts::FRAC_PI_4 * 64.0 * 64.0);
        for k in (0..frame.depth.len()).filter(|&k| frame.valid[k]) {
            assert!((frame.depth[k] - radius).abs() <= 0.5 * H, "depth {} at {k}", frame.depth[k]);
        }
        let apex = frame.normal[32 * 64 + 32];
        assert!(apex.z < -0.95, "apex normal {apex:?}");
    }
}

#[test]
fn mesh_every_edge_is_shared_by_at_most_two_triangles() {
    let mesh = build_surface_mesh(&gel(6.0), 6.0).unwrap();
    let mut count = std::collections::HashMap::new();
    for t in &mesh.triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    assert!(count.values().all(|&c| c == 1 || c == 2));
    let boundary = count.values().filter(|&&c| c == 1).count();
    assert!(boundary >= 3);
}

#[test]
fn reposing_keeps_connectivity() {
    let mut p = gel(5.0);
    let mesh = build_surface_mesh(&p, 5.0).unwrap();
    for x in p.x.iter_mut() {
        *x = Vec3::new(x.x * 1.1, x.y, x.z * 0.9 + 0.1);
    }
    let moved = mesh.posed(&p).unwrap();
    assert_eq!(moved.triangles, mesh.triangles);
    for (v, &i) in moved.vertices.iter().zip(&moved.particle_index) {
        assert_eq!(*v, p.x[i]);
    }
}

/// Sphere pressing straight down on the apex; returns the gel state after
/// each frame and the indenter centre at that time.
fn apex_press(radius: f64, r_ind: f64, depth: f64, frames: usize) -> (SurfaceMesh, Vec<(ParticleSet<f64>, Vec3<f64>)>) {
    let p = gel(radius);
    let mesh = build_surface_mesh(&p, radius).unwrap();
    let top = p.x.iter().map(|x| x.z).fold(0.0, f64::max);
    let t_end = frames as f64 / 24.0;
    let traj = Trajectory::from_positions(&[
        (0.0, Vec3::new(0.0, 0.0, top + r_ind)),
        (t_end, Vec3::new(0.0, 0.0, top + r_ind - depth)),
    ])
    .unwrap();
    let ind = IndenterState::new(IndenterShape::Sphere { radius: r_ind }, traj).unwrap();
    let grid = sensor_grid(radius, H, 2.0 * H).unwrap();
    let mut s = SimState::new(p, grid, Some(ind), MaterialParams::default(), 24.0, 50).unwrap();
    let mut out = Vec::new();
    for _ in 0..frames {
        s.step_frame().unwrap();
        let centre = s.indenter.as_ref().unwrap().pose.translation;
        out.push((s.particles.clone(), centre));
    }
    (mesh, out)
}

#[test]
fn pressing_deeper_shrinks_minimum_depth() {
    let radius = 6.0;
    let (mesh, states) = apex_press(radius, 4.0, 2.5, 5);
    let cfg = CameraConfig::default();
    let rest = render_maps(&mesh, &cfg).unwrap().min_depth().unwrap().0;
    let mut last = rest;
    for (p, _) in &states {
        let frame = render_maps(&mesh.posed(p).unwrap(), &cfg).unwrap();
        check_frame_invariants(&frame, &cfg);
        let d = frame.min_depth().unwrap().0;
        assert!(d < last, "min depth {d} did not drop below {last}");
        last = d;
    }
}

#[test]
fn indentation_minimum_lies_under_the_indenter() {
    let radius = 6.0;
    let r_ind = 4.0;
    let (mesh, states) = apex_press(radius, r_ind, 2.0, 6);
    let (p, centre) = states.last().unwrap();
    let cfg = CameraConfig::default();
    let posed = mesh.posed(p).unwrap();
    let frame = render_maps(&posed, &cfg).unwrap();
    let (d, k) = frame.min_depth().unwrap();
    assert!(d < radius - 1.0, "min depth {d}");
    let hit = pixel_to_ray(k % cfg.width, k / cfg.width, &cfg).unwrap() * d;
    let off = ((hit.x - centre.x).powi(2) + (hit.y - centre.y).powi(2)).sqrt();
    assert!(off <= r_ind, "minimum at {hit:?} outside the footprint");

    let brute = render_maps_brute(&posed, &cfg).unwrap();
    assert_eq!(frame, brute);
}

#[test]
fn bvh_and_brute_force_agree_exactly() {
    let mut p = gel(7.0);
    let mesh = build_surface_mesh(&p, 7.0).unwrap();
    for x in p.x.iter_mut() {
        let bump = 1.5 * (-(x.x * x.x + (x.y - 1.0).powi(2)) / 6.0).exp();
        *x = *x * (1.0 - bump / 7.0);
    }
    let posed = mesh.posed(&p).unwrap();
    for normals in [NormalMode::Flat, NormalMode::Smooth] {
        let cfg = CameraConfig { width: 48, height: 40, normals, ..Default::default() };
        assert_eq!(render_maps(&posed, &cfg).unwrap(), render_maps_brute(&posed, &cfg).unwrap());
    }
}

#[test]
fn half_resolution_matches_block_average() {
    let radius = 8.0;
    let mesh = build_surface_mesh(&gel(radius), radius).unwrap();
    let lo_cfg = CameraConfig::default();
    let hi_cfg = CameraConfig { width: 128, height: 128, ..Default::default() };
    let lo = render_maps(&mesh, &lo_cfg).unwrap();
    let hi = render_maps(&mesh, &hi_cfg).unwrap();
    let mut sum = 0.0;
    let mut n = 0;
    for v in 0..64 {
        for u in 0..64 {
            let subs = [(2 * u, 2 * v), (2 * u + 1, 2 * v), (2 * u, 2 * v + 1), (2 * u + 1, 2 * v + 1)];
            if !lo.valid[v * 64 + u] || subs.iter().any(|&(a, b)| !hi.valid[b * 128 + a]) {
                continue;
            }
            let avg = subs.iter().map(|&(a, b)| hi.depth[b * 128 + a]).sum::<f64>() / 4.0;
            sum += (avg - lo.depth[v * 64 + u]).abs();
            n += 1;
        }
    }
    assert!(n > 2000);
    let mean = sum / n as f64;
    assert!(mean < 0.2, "mean abs difference {mean}");
}

#[test]
fn rendering_is_deterministic_and_round_trips_through_files() {
    let mesh = build_surface_mesh(&gel(5.0), 5.0).unwrap();
    let cfg = CameraConfig { width: 32, height: 32, ..Default::default() };
    let a = render_maps(&mesh, &cfg).unwrap();
    assert_eq!(a, render_maps(&mesh, &cfg).unwrap());
    let dir = tempfile::tempdir().unwrap();
    a.write(dir.path(), "0000").unwrap();
    let b = TactileGeometryFrame::read(dir.path(), "0000", cfg.max_depth).unwrap();
    assert_eq!(a.valid, b.valid);
    for k in 0..a.depth.len() {
        assert!((a.depth[k] - b.depth[k]).abs() <= 1e-6 * a.depth[k].max(1.0));
        assert!((a.normal[k] - b.normal[k]).norm() < 0.02);
    }
}

#[test]
fn too_few_surface_particles_is_an_error() {
    let p = ParticleSet::new(
        vec![Vec3::new(1.0, 0.0, 1.0), Vec3::new(0.0, 1.0, 1.0), Vec3::new(-1.0, 0.0, 1.0)],
        vec![1.0; 3],
        vec![1.0; 3],
        vec![true; 3],
    )
    .unwrap();
    assert!(build_surface_mesh(&p, 2.0).is_err());
}
