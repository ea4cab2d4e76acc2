use gelsim_core::geometry::{fill_hemisphere_particles, HemisphereFill, IndenterShape, Trajectory, TrajectorySample};
use gelsim_core::linalg::{Mat3, Quat, Vec3};
use gelsim_core::mpm::*;
use gelsim_core::Error;
use proptest::prelude::*;

fn grid(half: f64) -> GridField<f64> {
    GridField::covering(Vec3::splat(-half), Vec3::splat(half), 1.0, 3).unwrap()
}

fn no_damping() -> MaterialParams<f64> {
    let mut m = MaterialParams::default();
    m.damping = 0.0;
    m
}

#[test]
fn particle_on_a_node_splits_mass_by_spline_weights() {
    let mut g = grid(3.0);
    let p = ParticleSet::new(vec![Vec3::zero()], vec![2.0], vec![1.0], vec![false]).unwrap();
    p2g(&p, &mut g, &no_damping(), 1e-3).unwrap();
    let at = |x: f64, y: f64, z: f64| {
        let i = ((x - g.origin.x) / g.h).round() as usize;
        let j = ((y - g.origin.y) / g.h).round() as usize;
        let k = ((z - g.origin.z) / g.h).round() as usize;
        g.mass[g.index(i, j, k)]
    };
    assert!((at(0.0, 0.0, 0.0) - 2.0 * 0.421875).abs() < 1e-15);
    assert!((at(1.0, 0.0, 0.0) - 2.0 * 0.125 * 0.75 * 0.75).abs() < 1e-15);
    assert!((at(-1.0, 1.0, 0.0) - 2.0 * 0.125 * 0.125 * 0.75).abs() < 1e-15);
    assert!((g.total_mass() - 2.0).abs() < 1e-15);
    assert!(g.velocity.iter().all(|v| *v == Vec3::zero()));
}

fn arb_particles() -> impl Strategy<Value = ParticleSet<f64>> {
    let one = (
        prop::array::uniform3(-2.5..2.5f64),
        prop::array::uniform3(-50.0..50.0f64),
        prop::array::uniform9(-0.2..0.2f64),
        prop::array::uniform9(-5.0..5.0f64),
        1e-7..1e-5f64,
    );
    prop::collection::vec(one, 1..120).prop_map(|ps| {
        let x = ps.iter().map(|p| Vec3::from_array(p.0)).collect();
        let mass = ps.iter().map(|p| p.4).collect();
        let mut set = ParticleSet::new(x, mass, vec![0.2; ps.len()], vec![false; ps.len()]).unwrap();
        for (i, p) in ps.iter().enumerate() {
            set.v[i] = Vec3::from_array(p.1);
            let d = p.2;
            set.f[i] = Mat3::identity() + Mat3::from_rows([[d[0], d[1], d[2]], [d[3], d[4], d[5]], [d[6], d[7], d[8]]]);
            let c = p.3;
            set.c[i] = Mat3::from_rows([[c[0], c[1], c[2]], [c[3], c[4], c[5]], [c[6], c[7], c[8]]]);
        }
        set
    })
}

fn rel(a: Vec3<f64>, b: Vec3<f64>, scale: f64) -> f64 {
    (a - b).norm() / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn transfers_conserve_mass_and_momentum(mut p in arb_particles()) {
        let mut g = grid(4.0);
        let dt = 1e-4;
        let m0 = p.total_mass();
        let q0 = p.total_momentum();
        // Momentum scale: sum of |m v| so the tolerance is meaningful when q0 ≈ 0.
        let scale: f64 = p.mass.iter().zip(&p.v).map(|(m, v)| m * v.norm()).sum();
        p2g(&p, &mut g, &no_damping(), dt).unwrap();
        prop_assert!((g.total_mass() - m0).abs() <= 1e-12 * m0);
        let qg = g.total_momentum();
        prop_assert!(rel(qg, q0, scale) <= 1e-8);
        g2p(&g, &mut p, dt).unwrap();
        prop_assert!(rel(p.total_momentum(), qg, scale) <= 1e-8);
    }
}

#[test]
fn rest_state_is_an_equilibrium() {
    let p = fill_hemisphere_particles(&HemisphereFill::new(4.0, 1.2, 2.0e6)).unwrap();
    let g = sensor_grid(4.0, 1.2, 2.4).unwrap();
    let mut s = SimState::new(p.clone(), g, None, MaterialParams::default(), 24.0, 100).unwrap();
    s.step_frame().unwrap();
    for i in 0..p.len() {
        assert!((s.particles.x[i] - p.x[i]).norm() <= 1e-12);
        assert!(s.particles.v[i].norm() <= 1e-12);
        assert!((s.particles.f[i] - Mat3::identity()).frobenius_sq().sqrt() <= 1e-12);
    }
}

fn interior_particles() -> ParticleSet<f64> {
    let x = vec![Vec3::new(0.13, -0.42, 0.77), Vec3::new(-1.1, 0.5, 0.0), Vec3::new(0.9, 0.95, -1.3)];
    ParticleSet::new(x, vec![1e-6; 3], vec![0.2; 3], vec![false; 3]).unwrap()
}

#[test]
fn g2p_reproduces_uniform_velocity() {
    let mut g = grid(4.0);
    g.mass.iter_mut().for_each(|m| *m = 1.0);
    let u = Vec3::new(3.0, -1.0, 0.5);
    g.velocity.iter_mut().for_each(|v| *v = u);
    let mut p = interior_particles();
    let x0 = p.x.clone();
    let dt = 1e-3;
    g2p(&g, &mut p, dt).unwrap();
    for i in 0..p.len() {
        assert!((p.v[i] - u).norm() < 1e-12);
        assert!(p.c[i].frobenius_sq().sqrt() < 1e-12);
        assert!((p.x[i] - (x0[i] + u * dt)).norm() < 1e-12);
        assert!((p.f[i] - Mat3::identity()).frobenius_sq().sqrt() < 1e-12);
    }
}

#[test]
fn g2p_reproduces_affine_velocity() {
    let mut g = grid(4.0);
    let a = Mat3::from_rows([[0.1, -0.2, 0.05], [0.3, 0.0, -0.1], [0.02, 0.07, -0.15]]);
    for idx in 0..g.len() {
        g.mass[idx] = 1.0;
        g.velocity[idx] = a.mul_vec(g.node_position(idx));
    }
    let mut p = interior_particles();
    let x0 = p.x.clone();
    g2p(&g, &mut p, 1e-4).unwrap();
    for i in 0..p.len() {
        assert!((p.c[i] - a).frobenius_sq().sqrt() < 1e-9);
        assert!((p.v[i] - a.mul_vec(x0[i])).norm() < 1e-9);
    }
}

#[test]
fn zero_grid_velocity_leaves_particles_alone() {
    let g = grid(4.0);
    let mut p = interior_particles();
    let before = p.clone();
    g2p(&g, &mut p, 1e-3).unwrap();
    assert_eq!(p, before);
}

#[test]
fn forward_kinematics_examples() {
    let traj =
        Trajectory::from_positions(&[(0.0, Vec3::new(0.0, 0.0, 10.0)), (1.0, Vec3::new(0.0, 0.0, 5.0))]).unwrap();
    let mut ind = IndenterState::new(IndenterShape::Sphere { radius: 1.0 }, traj).unwrap();
    fk_step(&mut ind, 0.5, 1e-3);
    assert!((ind.pose.translation.z - 7.5).abs() < 1e-12);
    assert!((ind.lin_vel - Vec3::new(0.0, 0.0, -5.0)).norm() < 1e-9);
    assert!(ind.ang_vel.norm() < 1e-12);
    assert_eq!(ind.pose.rotation, Quat::IDENTITY);
    fk_step(&mut ind, 2.0, 1e-3);
    assert_eq!(ind.pose.translation, Vec3::new(0.0, 0.0, 5.0));
    assert_eq!(ind.lin_vel, Vec3::zero());
}

/// Small tilted-box poke used by the invariance and determinism checks.
fn poke_scene(rot: Quat) -> SimState<f64> {
    let radius = 4.0;
    let mut p = fill_hemisphere_particles(&HemisphereFill::new(radius, 1.2, 2.0e6)).unwrap();
    for i in 0..p.len() {
        p.x[i] = rot.rotate(p.x[i]);
        p.v[i] = rot.rotate(Vec3::new(p.x[i].z * 2.0, -3.0, 1.0));
    }
    let tilt = Quat::from_axis_angle(Vec3::new(1.0, 0.3, 0.0), 0.4);
    let sample =
        |t: f64, pos: Vec3<f64>| TrajectorySample { t, position: rot.rotate(pos), orientation: rot.mul(&tilt) };
    let traj = Trajectory::new(vec![
        sample(0.0, Vec3::new(0.8, 0.3, radius + 1.2)),
        sample(0.05, Vec3::new(1.3, 0.1, radius - 0.4)),
    ])
    .unwrap();
    let ind = IndenterState::new(IndenterShape::Box { half_extents: [2.0, 1.0, 1.5] }, traj).unwrap();
    let g = sensor_grid(radius, 1.2, 2.4).unwrap();
    SimState::new(p, g, Some(ind), MaterialParams::default(), 24.0, 10).unwrap()
}

#[test]
fn quarter_turn_about_z_commutes_with_stepping() {
    // A quarter turn about z maps the lattice and the sticky boundary onto themselves.
    let rot = Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), std::f64::consts::FRAC_PI_2);
    let mut a = poke_scene(Quat::IDENTITY);
    let mut b = poke_scene(rot);
    a.step_frame().unwrap();
    b.step_frame().unwrap();
    let scale = a.particles.x.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let moved = a
        .particles
        .x
        .iter()
        .zip(poke_scene(Quat::IDENTITY).particles.x)
        .map(|(x, y)| (*x - y).norm())
        .fold(0.0, f64::max);
    assert!(moved > 1e-3, "scene must actually deform");
    for (xa, xb) in a.particles.x.iter().zip(&b.particles.x) {
        assert!((rot.rotate(*xa) - *xb).norm() <= 1e-6 * scale);
    }
}

#[test]
fn repeated_runs_are_bit_identical() {
    let mut a = poke_scene(Quat::IDENTITY);
    let mut b = poke_scene(Quat::IDENTITY);
    for _ in 0..2 {
        a.step_frame().unwrap();
        b.step_frame().unwrap();
    }
    assert_eq!(a.particles, b.particles);
    let mut buf_a = Vec::new();
    let mut buf_b = Vec::new();
    write_particles(&a.particles, &mut buf_a).unwrap();
    write_particles(&b.particles, &mut buf_b).unwrap();
    assert_eq!(buf_a, buf_b);
}

#[test]
fn two_millimetre_press_is_stable_and_bounded() {
    let radius = 8.0;
    let h = DEFAULT_VOXEL_RES;
    let p = fill_hemisphere_particles(&HemisphereFill::new(radius, h, DEFAULT_MATERIAL.density)).unwrap();
    let top = p.x.iter().map(|x| x.z).fold(0.0, f64::max);
    let x0 = p.x.clone();
    let surf = p.surface_indices();
    let r_ind = 8.0;
    let traj = Trajectory::from_positions(&[
        (0.0, Vec3::new(0.0, 0.0, top + r_ind)),
        (0.5, Vec3::new(0.0, 0.0, top + r_ind - 2.0)),
    ])
    .unwrap();
    let ind = IndenterState::new(IndenterShape::Sphere { radius: r_ind }, traj).unwrap();
    let g = sensor_grid(radius, h, 2.0 * h).unwrap();
    let mut s = SimState::new(p, g, Some(ind), MaterialParams::default(), DEFAULT_FPS, DEFAULT_SUBSTEPS).unwrap();
    for _ in 0..48 {
        s.step_frame().unwrap();
        assert!(s.particles.x.iter().all(|x| x.is_finite()));
        assert!(s.particles.f.iter().all(|f| f.det() > 0.0));
    }
    let disp = surf.iter().map(|&i| (s.particles.x[i] - x0[i]).norm()).fold(0.0, f64::max);
    assert!((1.5..=2.5).contains(&disp), "max surface displacement {disp}");
    assert_eq!(surface_points(&s.particles).unwrap().len(), surf.len());
    assert_eq!(s.particles.surface_indices(), surf);
}

#[test]
fn runaway_velocity_aborts_with_substep_index() {
    let mut p = fill_hemisphere_particles(&HemisphereFill::new(3.0, 1.2, 2.0e6)).unwrap();
    p.v[5] = Vec3::new(0.0, 0.0, 1e6);
    let g = sensor_grid(3.0, 1.2, 2.4).unwrap();
    let mut mat = MaterialParams::default();
    mat.damping = 0.0;
    let mut s = SimState::new(p, g, None, mat, 24.0, 10).unwrap();
    s.sticky_base = false;
    match s.step_frame() {
        Err(Error::Substep { substep, source }) => {
            assert_eq!(substep, 0);
            assert!(source.is_numeric() || matches!(*source, Error::ParticleOutsideGrid { .. }), "{source}");
        }
        other => panic!("expected an abort, got {other:?}"),
    }
}

#[test]
fn inverted_deformation_is_rejected() {
    let mut p = interior_particles();
    p.f[1] = Mat3::diag(1.0, 1.0, -1.0);
    let mut g = grid(4.0);
    match p2g(&p, &mut g, &no_damping(), 1e-3) {
        Err(Error::InvertedDeformation { index, .. }) => assert_eq!(index, 1),
        other => panic!("{other:?}"),
    }
    let mut far = interior_particles();
    far.x[2] = Vec3::new(50.0, 0.0, 0.0);
    assert!(matches!(p2g(&far, &mut g, &no_damping(), 1e-3), Err(Error::ParticleOutsideGrid { index: 2, .. })));
}
