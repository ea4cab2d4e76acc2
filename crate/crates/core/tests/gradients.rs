use gelsim_core::calib::{loss_and_grad, loss_at, CalibParams, DemoSequence};
use gelsim_core::geometry::{fill_hemisphere_particles, HemisphereFill, IndenterShape, PointCloud, Trajectory};
use gelsim_core::linalg::Vec3;
use gelsim_core::mpm::{sensor_grid, IndenterState, MaterialParams, SimState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// About 200 particles, one frame of 10 substeps, random initial velocities and
/// a descending sphere; targets come from a rollout at different parameters.
fn small_scene(seed: u64) -> (SimState<f64>, DemoSequence) {
    let radius = 2.75;
    let h = 1.2;
    let mut fill = HemisphereFill::new(radius, h, 2.0e6);
    fill.seed = seed;
    let mut particles = fill_hemisphere_particles(&fill).unwrap();
    assert!((150..260).contains(&particles.len()), "{}", particles.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in particles.v.iter_mut() {
        *v = Vec3::new(rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0));
    }
    let grid = sensor_grid(radius, h, 2.0 * h).unwrap();
    let template = SimState::new(particles, grid, None, MaterialParams::default(), 24.0, 10).unwrap();
    let top = radius + 2.0;
    let traj = Trajectory::from_positions(&[
        (0.0, Vec3::new(0.2, -0.1, top - 0.3)),
        (1.0 / 24.0, Vec3::new(0.2, -0.1, top - 0.8)),
    ])
    .unwrap();
    let shape = IndenterShape::Sphere { radius: 2.0 };
    let mut target_state = template.clone();
    target_state.material.youngs *= 1.5;
    target_state.material.poisson = 0.25;
    target_state.indenter = Some(IndenterState::new(shape.clone(), traj.clone()).unwrap());
    target_state.step_frame().unwrap();
    let cloud = PointCloud::new(target_state.particles.surface_positions().unwrap());
    let seq =
        DemoSequence { name: format!("seed{seed}"), indenter: shape, trajectory: traj, targets: vec![(0, cloud)] };
    (template, seq)
}

#[test]
fn forward_mode_gradient_matches_central_differences() {
    let h = 1e-3;
    for seed in 0..5 {
        let (template, seq) = small_scene(seed);
        let theta = CalibParams::new(27575.0, 0.303);
        let (loss, grad) = loss_and_grad(&template, &seq, &theta).unwrap();
        assert!(loss > 0.0);
        let at = |dl: f64, dn: f64| {
            loss_at(&template, &seq, &CalibParams { log_e: theta.log_e + dl, nu: theta.nu + dn }).unwrap()
        };
        assert!((at(0.0, 0.0) - loss).abs() <= 1e-12 * loss);
        let fd = [(at(h, 0.0) - at(-h, 0.0)) / (2.0 * h), (at(0.0, h) - at(0.0, -h)) / (2.0 * h)];
        for k in 0..2 {
            if grad[k].abs() > 1e-6 {
                let rel = (grad[k] - fd[k]).abs() / grad[k].abs();
                assert!(rel < 1e-2, "seed {seed} component {k}: forward {} vs fd {}", grad[k], fd[k]);
            }
        }
    }
}

#[test]
fn self_consistent_targets_have_small_loss() {
    let (template, mut seq) = small_scene(7);
    let theta = CalibParams::new(27575.0, 0.303);
    let mut state = template.clone();
    state.indenter = Some(IndenterState::new(seq.indenter.clone(), seq.trajectory.clone()).unwrap());
    state.step_frame().unwrap();
    seq.targets = vec![(0, PointCloud::new(state.particles.surface_positions().unwrap()))];
    let (loss, _) = loss_and_grad(&template, &seq, &theta).unwrap();
    assert!(loss < 0.1, "{loss}");
}
