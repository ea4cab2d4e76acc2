use crate::net::{grad_slices, Grads, OpticalNet};
use crate::shading::{compose, image_to_tensor, residual_target, tensor_to_image};
use crate::tensor::{Scalar, Tensor};
use crate::{OpticalError, Result};
use gelsim_core::image::RgbImage;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 8,
            lr: 3e-4,
            weight_decay: 1e-4,
            epochs: 100,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.batch_size > 0
            && self.epochs > 0
            && self.lr > 0.0
            && self.weight_decay >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if !ok {
            return Err(OpticalError::Config(format!("invalid training configuration {self:?}")));
        }
        Ok(())
    }
}

/// What the network is trained to output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// `frame − idle`, added back onto the idle frame at inference.
    Residual,
    /// The frame itself.
    Direct,
}

impl TargetMode {
    pub fn target<T: Scalar>(self, frame: &RgbImage, idle: &RgbImage) -> Result<Tensor<T>> {
        match self {
            TargetMode::Residual => residual_target(frame, idle),
            TargetMode::Direct => Ok(image_to_tensor(frame)),
        }
    }

    /// Turns a network output into the predicted camera image.
    pub fn image<T: Scalar>(self, output: &Tensor<T>, idle: &RgbImage) -> Result<RgbImage> {
        match self {
            TargetMode::Residual => compose(idle, output),
            TargetMode::Direct => tensor_to_image(output),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T> {
    pub input: Tensor<T>,
    pub target: Tensor<T>,
}

/// Mean squared error over every output entry.
pub fn mse<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> f64 {
    let s: f64 = pred.data.iter().zip(&target.data).map(|(p, t)| (p.value() - t.value()).powi(2)).sum();
    s / pred.len() as f64
}

/// Loss and parameter gradients of one sample, with the loss scaled by `weight`.
pub fn sample_grad<T: Scalar>(net: &OpticalNet<T>, s: &Sample<T>, weight: f64) -> Result<(f64, Grads<T>)> {
    let act = net.forward_cached(&s.input)?;
    if act.y.shape() != s.target.shape() {
        return Err(OpticalError::Shape(format!("prediction {:?} vs target {:?}", act.y.shape(), s.target.shape())));
    }
    let scale = T::lit(2.0 * weight / act.y.len() as f64);
    let dy = act.y.zip_map(&s.target, |p, t| (p - t) * scale);
    let mut g = net.zero_grads();
    net.backward(&act, &dy, &mut g);
    Ok((mse(&act.y, &s.target), g))
}

/// Mean loss over a dataset.
pub fn dataset_loss<T: Scalar>(net: &OpticalNet<T>, data: &[Sample<T>]) -> Result<f64> {
    let losses: Vec<f64> =
        data.par_iter().map(|s| Ok(mse(&net.forward(&s.input)?, &s.target))).collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len().max(1) as f64)
}

/// Adam with L2 weight decay folded into the gradient.
pub struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    pub fn new<T: Scalar>(net: &OpticalNet<T>) -> Self {
        let zeros: Vec<Vec<f64>> = net.params().iter().map(|p| vec![0.0; p.len()]).collect();
        Adam { m: zeros.clone(), v: zeros, t: 0 }
    }

    pub fn step<T: Scalar>(&mut self, net: &mut OpticalNet<T>, grads: &Grads<T>, cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        let gs = grad_slices(grads);
        for (k, p) in net.params_mut().into_iter().enumerate() {
            for (i, w) in p.iter_mut().enumerate() {
                let g = gs[k][i].value() + cfg.weight_decay * w.value();
                let m = &mut self.m[k][i];
                let v = &mut self.v[k][i];
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                let upd = cfg.lr * (*m / bc1) / ((*v / bc2).sqrt() + cfg.eps);
                *w = T::lit(w.value() - upd);
            }
        }
    }
}

/// Mini-batch training. Returns the mean training loss of every epoch.
pub fn train<T: Scalar>(net: &mut OpticalNet<T>, data: &[Sample<T>], cfg: &TrainConfig) -> Result<Vec<f64>> {
    train_with(net, data, cfg, |_, _| {})
}

/// As [`train`], calling `on_epoch(epoch, loss)` after every epoch.
pub fn train_with<T: Scalar>(
    net: &mut OpticalNet<T>,
    data: &[Sample<T>],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(OpticalError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(net);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let weight = 1.0 / idx.len() as f64;
            let parts: Vec<(f64, Grads<T>)> =
                idx.par_iter().map(|&i| sample_grad(net, &data[i], weight)).collect::<Result<_>>()?;
            let mut grads = net.zero_grads();
            let mut loss = 0.0;
            for (l, g) in &parts {
                loss += l;
                grads.iter_mut().zip(g).for_each(|(a, b)| a.add_assign(b));
            }
            if !loss.is_finite() {
                return Err(OpticalError::NonFiniteLoss { epoch, batch });
            }
            adam.step(net, &grads, cfg);
            epoch_loss += loss;
        }
        let mean = epoch_loss / data.len() as f64;
        log::debug!("epoch {epoch}: loss {mean:.6e}");
        on_epoch(epoch, mean);
        history.push(mean);
    }
    Ok(history)
}
