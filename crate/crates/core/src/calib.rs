//! Identification of (E, ν) from target surface clouds.
//!
//! Each rollout carries two tangent channels, ∂/∂log E and ∂/∂ν, so one
//! simulation yields the loss and its exact gradient.

use crate::error::{Error, Result};
use crate::geometry::{IndenterShape, PointCloud, Trajectory};
use crate::linalg::Vec3;
use crate::metrics::nearest_indices;
use crate::mpm::{IndenterState, SimState};
use crate::scalar::Real;
use crate::Dual2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const NU_MIN: f64 = 0.0;
pub const NU_MAX: f64 = 0.49;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibParams {
    /// Natural log of Young's modulus in Pa.
    pub log_e: f64,
    pub nu: f64,
}

impl CalibParams {
    pub fn new(youngs: f64, nu: f64) -> Self {
        CalibParams { log_e: youngs.ln(), nu }
    }

    pub fn youngs(&self) -> f64 {
        self.log_e.exp()
    }

    /// (E, ν) as dual numbers seeded with the two tangent directions.
    pub fn seeded(&self) -> (Dual2, Dual2) {
        let e = self.youngs();
        (Dual2::new(e, [e, 0.0]), Dual2::new(self.nu, [0.0, 1.0]))
    }

    fn clamp_nu(mut self) -> Self {
        self.nu = self.nu.clamp(NU_MIN, NU_MAX);
        self
    }
}

/// One indentation recording: the indenter, how it moved, and the surface
/// clouds observed after selected frames (0-based; frame `k` is the state after
/// `k + 1` simulated frames).
#[derive(Clone, Debug)]
pub struct DemoSequence {
    pub name: String,
    pub indenter: IndenterShape,
    pub trajectory: Trajectory,
    pub targets: Vec<(usize, PointCloud)>,
}

impl DemoSequence {
    pub fn validate(&self) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::Empty("target clouds"));
        }
        for w in self.targets.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidParameter(format!(
                    "sequence {}: target frames must be strictly increasing",
                    self.name
                )));
            }
        }
        if self.targets.iter().any(|(_, c)| c.is_empty()) {
            return Err(Error::Empty("target cloud"));
        }
        self.indenter.validate()
    }

    pub fn last_frame(&self) -> usize {
        self.targets.last().map(|t| t.0).unwrap_or(0)
    }
}

/// Symmetric mean nearest-neighbour distance, differentiable in `sim` with
/// the nearest-neighbour assignment frozen at the primal positions.
pub fn chamfer_loss<T: Real>(sim: &[Vec3<T>], target: &[Vec3<f64>]) -> Result<T> {
    if sim.is_empty() || target.is_empty() {
        return Err(Error::Empty("point cloud"));
    }
    let primal: Vec<Vec3<f64>> = sim.iter().map(|p| p.value()).collect();
    let to_target = nearest_indices(&primal, target);
    let to_sim = nearest_indices(target, &primal);
    let forward: T = sim.iter().zip(&to_target).map(|(p, &j)| (*p - Vec3::lift(target[j])).norm()).sum();
    let backward: T = target.iter().zip(&to_sim).map(|(q, &i)| (sim[i] - Vec3::lift(*q)).norm()).sum();
    Ok(T::lit(0.5) * (forward / T::lit(sim.len() as f64) + backward / T::lit(target.len() as f64)))
}

/// Indenter for `seq`, inheriting contact settings from the template scene.
fn sequence_indenter(template: &SimState<f64>, seq: &DemoSequence) -> Result<IndenterState> {
    let mut ind = IndenterState::new(seq.indenter.clone(), seq.trajectory.clone())?;
    if let Some(t) = &template.indenter {
        ind.friction = t.friction;
        ind.softness = t.softness;
    }
    Ok(ind)
}

/// Rolls `seq` out from the template scene with scalar type `T` whose elastic
/// parameters are `(youngs, nu)`; returns the mean Chamfer loss over targets.
pub fn rollout_loss<T: Real>(template: &SimState<f64>, seq: &DemoSequence, youngs: T, nu: T) -> Result<T> {
    seq.validate()?;
    let mut state = SimState::new(
        template.particles.lift::<T>(),
        template.grid.lift::<T>(),
        Some(sequence_indenter(template, seq)?),
        template.material.with_elastic(youngs, nu),
        template.fps,
        template.substeps_per_frame,
    )?;
    state.sticky_base = template.sticky_base;
    let mut total = T::zero();
    let mut next = 0;
    for frame in 0..=seq.last_frame() {
        state.step_frame()?;
        if seq.targets[next].0 == frame {
            let sim = state.particles.surface_positions()?;
            total += chamfer_loss(&sim, &seq.targets[next].1.points)?;
            next += 1;
        }
    }
    if !total.all_finite() {
        let substep = state.frame * state.substeps_per_frame as u64;
        return Err(Error::Substep { substep, source: Box::new(Error::NonFinite { index: 0 }) });
    }
    Ok(total / T::lit(seq.targets.len() as f64))
}

/// Loss and its forward-mode gradient with respect to (log E, ν).
pub fn loss_and_grad(template: &SimState<f64>, seq: &DemoSequence, params: &CalibParams) -> Result<(f64, [f64; 2])> {
    let (e, nu) = params.seeded();
    let loss = rollout_loss(template, seq, e, nu)?;
    Ok((loss.re, loss.eps))
}

/// Plain loss at `params`, without tangents.
pub fn loss_at(template: &SimState<f64>, seq: &DemoSequence, params: &CalibParams) -> Result<f64> {
    rollout_loss(template, seq, params.youngs(), params.nu)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// θ ← θ − lr·∇.
    GradientDescent,
    /// Adam with β = (0.9, 0.999), ε = 1e-8; the step is lr in parameter units
    /// regardless of the loss scale.
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibConfig {
    pub lr: f64,
    pub iters: usize,
    pub optimizer: Optimizer,
}

impl Default for CalibConfig {
    fn default() -> Self {
        CalibConfig { lr: 0.1, iters: 30, optimizer: Optimizer::Adam }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub log_e: f64,
    pub nu: f64,
    pub loss: f64,
    pub grad: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceOutcome {
    pub name: String,
    /// Final parameters; `None` when the optimization failed.
    pub params: Option<CalibParams>,
    pub history: Vec<IterationRecord>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibOutcome {
    pub params: CalibParams,
    pub sequences: Vec<SequenceOutcome>,
}

/// Runs `cfg.iters` optimizer steps from `init` on any loss-and-gradient oracle,
/// clamping ν after each update.
pub fn optimize<F>(
    init: CalibParams,
    cfg: &CalibConfig,
    mut oracle: F,
) -> (CalibParams, Vec<IterationRecord>, Option<Error>)
where
    F: FnMut(&CalibParams) -> Result<(f64, [f64; 2])>,
{
    let mut theta = init.clamp_nu();
    let mut history = Vec::with_capacity(cfg.iters);
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut m = [0.0; 2];
    let mut v = [0.0; 2];
    for it in 0..cfg.iters {
        let (loss, grad) = match oracle(&theta) {
            Ok(r) => r,
            Err(e) => return (theta, history, Some(e)),
        };
        if !loss.is_finite() || !grad.iter().all(|g| g.is_finite()) {
            return (theta, history, Some(Error::NonFinite { index: it }));
        }
        history.push(IterationRecord { log_e: theta.log_e, nu: theta.nu, loss, grad });
        let step = match cfg.optimizer {
            Optimizer::GradientDescent => grad.map(|g| cfg.lr * g),
            Optimizer::Adam => {
                let t = (it + 1) as i32;
                let mut s = [0.0; 2];
                for k in 0..2 {
                    m[k] = b1 * m[k] + (1.0 - b1) * grad[k];
                    v[k] = b2 * v[k] + (1.0 - b2) * grad[k] * grad[k];
                    let mh = m[k] / (1.0 - b1.powi(t));
                    let vh = v[k] / (1.0 - b2.powi(t));
                    s[k] = cfg.lr * mh / (vh.sqrt() + eps);
                }
                s
            }
        };
        theta = CalibParams { log_e: theta.log_e - step[0], nu: theta.nu - step[1] }.clamp_nu();
    }
    (theta, history, None)
}

/// Element-wise median over parameter sets (mean of the middle pair for even counts).
pub fn median_params(params: &[CalibParams]) -> Result<CalibParams> {
    if params.is_empty() {
        return Err(Error::Empty("parameter set"));
    }
    let median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    };
    Ok(CalibParams {
        log_e: median(params.iter().map(|p| p.log_e).collect()),
        nu: median(params.iter().map(|p| p.nu).collect()),
    })
}

/// Optimizes every sequence independently (in parallel) and returns the
/// median of the survivors.
pub fn calibrate(
    template: &SimState<f64>,
    sequences: &[DemoSequence],
    init: CalibParams,
    cfg: &CalibConfig,
) -> Result<CalibOutcome> {
    if sequences.is_empty() {
        return Err(Error::Empty("demonstration sequences"));
    }
    let outcomes: Vec<SequenceOutcome> = sequences
        .par_iter()
        .map(|seq| {
            let (theta, history, err) = optimize(init, cfg, |p| loss_and_grad(template, seq, p));
            if let Some(e) = &err {
                log::warn!("calibration of sequence {} failed: {e}", seq.name);
            }
            SequenceOutcome {
                name: seq.name.clone(),
                params: err.is_none().then_some(theta),
                history,
                error: err.map(|e| e.to_string()),
            }
        })
        .collect();
    let survivors: Vec<CalibParams> = outcomes.iter().filter_map(|o| o.params).collect();
    if survivors.is_empty() {
        return Err(Error::AllSequencesFailed(sequences.len()));
    }
    if survivors.len() < sequences.len() {
        log::warn!("median over {} of {} sequences", survivors.len(), sequences.len());
    }
    Ok(CalibOutcome { params: median_params(&survivors)?, sequences: outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Float;

    fn v(x: f64, y: f64, z: f64) -> Vec3<f64> {
        Vec3::new(x, y, z)
    }

    #[test]
    fn chamfer_hand_cases() {
        let a = [v(0.0, 0.0, 0.0)];
        assert_eq!(chamfer_loss(&a, &[v(0.0, 0.0, 2.0)]).unwrap(), 2.0);
        assert_eq!(chamfer_loss(&a, &[v(1.0, 0.0, 0.0), v(3.0, 0.0, 0.0)]).unwrap(), 1.5);
        assert_eq!(chamfer_loss(&a, &a).unwrap(), 0.0);
        assert!(chamfer_loss::<f64>(&[], &a).is_err());
    }

    #[test]
    fn chamfer_tangent_matches_finite_difference() {
        let target = [v(0.0, 0.0, 0.0), v(2.0, 1.0, 0.0), v(-1.0, 0.5, 1.0)];
        let base = [v(0.3, 0.1, 0.2), v(1.5, 1.2, -0.4)];
        let lifted: Vec<Vec3<Dual2>> = base
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut q: Vec3<Dual2> = Vec3::lift(*p);
                q.x.eps[0] = if i == 0 { 1.0 } else { 0.0 };
                q.z.eps[1] = if i == 1 { 1.0 } else { 0.0 };
                q
            })
            .collect();
        let l = chamfer_loss(&lifted, &target).unwrap();
        let h = 1e-6;
        let f = |dx: f64, dz: f64| {
            let mut b = base;
            b[0].x += dx;
            b[1].z += dz;
            chamfer_loss(&b, &target).unwrap()
        };
        assert!(((f(h, 0.0) - f(-h, 0.0)) / (2.0 * h) - l.eps[0]).abs() < 1e-6);
        assert!(((f(0.0, h) - f(0.0, -h)) / (2.0 * h) - l.eps[1]).abs() < 1e-6);
    }

    #[test]
    fn quadratic_stand_in_gradient_is_exact() {
        let theta = CalibParams { log_e: 9.0, nu: 0.45 };
        let (e, nu) = theta.seeded();
        let loss = (e.ln() - Dual2::constant(10.0)).powi(2) + (nu - Dual2::constant(0.3)).powi(2);
        assert!((loss.eps[0] - 2.0 * (9.0 - 10.0)).abs() < 1e-12);
        assert!((loss.eps[1] - 2.0 * (0.45 - 0.3)).abs() < 1e-12);
    }

    fn quadratic(p: &CalibParams) -> Result<(f64, [f64; 2])> {
        let (a, b) = (p.log_e - 10.0, p.nu - 0.3);
        Ok((a * a + b * b, [2.0 * a, 2.0 * b]))
    }

    #[test]
    fn optimizer_stays_put_at_optimum() {
        for optimizer in [Optimizer::GradientDescent, Optimizer::Adam] {
            let cfg = CalibConfig { optimizer, ..Default::default() };
            let init = CalibParams { log_e: 10.0, nu: 0.3 };
            let (theta, hist, err) = optimize(init, &cfg, quadratic);
            assert!(err.is_none());
            assert_eq!(hist.len(), 30);
            assert!((theta.log_e - 10.0).abs() < 1e-6 && (theta.nu - 0.3).abs() < 1e-6);
        }
    }

    #[test]
    fn gradient_descent_contracts_quadratic() {
        let cfg = CalibConfig { optimizer: Optimizer::GradientDescent, ..Default::default() };
        let (theta, hist, _) = optimize(CalibParams { log_e: 11.0, nu: 0.45 }, &cfg, quadratic);
        // Each step multiplies the offset by 1 − 2·lr = 0.8.
        assert!((hist[1].log_e - 10.0 - 0.8).abs() < 1e-12);
        assert!((theta.log_e - 10.0 - 0.8f64.powi(30)).abs() < 1e-9);
        assert!(hist.windows(2).all(|w| w[1].loss < w[0].loss));
    }

    #[test]
    fn nu_is_clamped() {
        let cfg = CalibConfig { optimizer: Optimizer::GradientDescent, lr: 10.0, iters: 3 };
        let (theta, hist, _) = optimize(CalibParams { log_e: 10.0, nu: 0.45 }, &cfg, |_| Ok((1.0, [0.0, -1.0])));
        assert_eq!(theta.nu, NU_MAX);
        assert!(hist.iter().all(|h| (NU_MIN..=NU_MAX).contains(&h.nu)));
    }

    #[test]
    fn median_is_permutation_invariant() {
        let p = |a: f64, b: f64| CalibParams { log_e: a, nu: b };
        let set = [p(1.0, 0.3), p(3.0, 0.1), p(2.0, 0.2), p(5.0, 0.4)];
        let m = median_params(&set).unwrap();
        assert_eq!(m, p(2.5, 0.25));
        let mut rev = set;
        rev.reverse();
        assert_eq!(median_params(&rev).unwrap(), m);
        assert_eq!(median_params(&set[..1]).unwrap(), set[0]);
        assert!(median_params(&[]).is_err());
    }
}
