use crate::layers::*;
use crate::tensor::{Scalar, Tensor};
use crate::{OpticalError, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const IN_CHANNELS: usize = 4;
pub const OUT_CHANNELS: usize = 3;
pub const WIDTHS: [usize; 2] = [16, 32];

/// Layer kinds, in the numbering used by the weights file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u32)]
pub enum LayerKind {
    Conv = 1,
    Silu = 2,
    Upsample = 3,
    SkipAdd = 4,
    Tanh = 5,
}

impl LayerKind {
    pub fn from_id(id: u32) -> Option<Self> {
        Some(match id {
            1 => LayerKind::Conv,
            2 => LayerKind::Silu,
            3 => LayerKind::Upsample,
            4 => LayerKind::SkipAdd,
            5 => LayerKind::Tanh,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerDesc {
    pub kind: LayerKind,
    pub cin: u32,
    pub cout: u32,
    pub kernel: u32,
    pub stride: u32,
}

/// Encoder–decoder:
///
/// ```text
/// x(4) ─conv─silu─ a1(16) ─conv/2─silu─ a2(32) ─conv─silu─ a3(32)
///      ─up×2─conv─silu─(+a1)─ s(16) ─conv─tanh─ y(3)
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct OpticalNet<T> {
    pub convs: [Conv2d<T>; 5],
}

/// Intermediate values kept for the backward pass.
#[derive(Clone, Debug)]
pub struct Activations<T> {
    pub x: Tensor<T>,
    z: [Tensor<T>; 5],
    a1: Tensor<T>,
    a2: Tensor<T>,
    a3: Tensor<T>,
    up: Tensor<T>,
    skip: Tensor<T>,
    pub y: Tensor<T>,
}

pub type Grads<T> = Vec<ConvGrad<T>>;

impl<T: Scalar> OpticalNet<T> {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [c1, c2] = WIDTHS;
        OpticalNet {
            convs: [
                Conv2d::init(IN_CHANNELS, c1, 1, &mut rng),
                Conv2d::init(c1, c2, 2, &mut rng),
                Conv2d::init(c2, c2, 1, &mut rng),
                Conv2d::init(c2, c1, 1, &mut rng),
                Conv2d::init(c1, OUT_CHANNELS, 1, &mut rng),
            ],
        }
    }

    pub fn param_count(&self) -> usize {
        self.convs.iter().map(|c| c.param_count()).sum()
    }

    pub fn descriptors(&self) -> Vec<LayerDesc> {
        let conv = |c: &Conv2d<T>| LayerDesc {
            kind: LayerKind::Conv,
            cin: c.cin as u32,
            cout: c.cout as u32,
            kernel: KERNEL as u32,
            stride: c.stride as u32,
        };
        let plain = |kind, ch: usize| LayerDesc { kind, cin: ch as u32, cout: ch as u32, kernel: 0, stride: 1 };
        let [c1, c2] = WIDTHS;
        vec![
            conv(&self.convs[0]),
            plain(LayerKind::Silu, c1),
            conv(&self.convs[1]),
            plain(LayerKind::Silu, c2),
            conv(&self.convs[2]),
            plain(LayerKind::Silu, c2),
            LayerDesc { kind: LayerKind::Upsample, cin: c2 as u32, cout: c2 as u32, kernel: 0, stride: 2 },
            conv(&self.convs[3]),
            plain(LayerKind::Silu, c1),
            plain(LayerKind::SkipAdd, c1),
            conv(&self.convs[4]),
            plain(LayerKind::Tanh, OUT_CHANNELS),
        ]
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.c != IN_CHANNELS || x.h < 2 || x.w < 2 {
            return Err(OpticalError::Shape(format!(
                "network expects {IN_CHANNELS}xHxW input with H, W >= 2, got {}x{}x{}",
                x.c, x.h, x.w
            )));
        }
        Ok(())
    }

    pub fn forward_cached(&self, x: &Tensor<T>) -> Result<Activations<T>> {
        self.check_input(x)?;
        let c = &self.convs;
        let z0 = c[0].forward(x);
        let a1 = silu(&z0);
        let z1 = c[1].forward(&a1);
        let a2 = silu(&z1);
        let z2 = c[2].forward(&a2);
        let a3 = silu(&z2);
        let up = upsample(&a3, x.h, x.w);
        let z3 = c[3].forward(&up);
        let mut skip = silu(&z3);
        skip.add_assign(&a1);
        let z4 = c[4].forward(&skip);
        let y = tanh(&z4);
        Ok(Activations { x: x.clone(), z: [z0, z1, z2, z3, z4], a1, a2, a3, up, skip, y })
    }

    /// Output in [−1, 1] with the input's spatial size.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward_cached(x)?.y)
    }

    pub fn zero_grads(&self) -> Grads<T> {
        self.convs.iter().map(ConvGrad::zeros_like).collect()
    }

    /// Backpropagates `dy` (gradient w.r.t. the output) and accumulates the
    /// parameter gradients into `grads`. Returns the input gradient.
    pub fn backward(&self, act: &Activations<T>, dy: &Tensor<T>, grads: &mut Grads<T>) -> Tensor<T> {
        let c = &self.convs;
        let dz4 = tanh_backward(&act.y, dy);
        let dskip = c[4].backward(&act.skip, &dz4, &mut grads[4]);
        let dz3 = silu_backward(&act.z[3], &dskip);
        let dup = c[3].backward(&act.up, &dz3, &mut grads[3]);
        let da3 = upsample_backward(&dup, act.a3.h, act.a3.w);
        let dz2 = silu_backward(&act.z[2], &da3);
        let da2 = c[2].backward(&act.a2, &dz2, &mut grads[2]);
        let dz1 = silu_backward(&act.z[1], &da2);
        let mut da1 = c[1].backward(&act.a1, &dz1, &mut grads[1]);
        da1.add_assign(&dskip);
        let dz0 = silu_backward(&act.z[0], &da1);
        c[0].backward(&act.x, &dz0, &mut grads[0])
    }

    /// Every parameter buffer in declaration order (weight then bias per conv).
    pub fn params(&self) -> Vec<&[T]> {
        self.convs.iter().flat_map(|c| [c.weight.as_slice(), c.bias.as_slice()]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        self.convs.iter_mut().flat_map(|c| [c.weight.as_mut_slice(), c.bias.as_mut_slice()]).collect()
    }

    pub fn cast<U: Scalar>(&self) -> OpticalNet<U> {
        let conv = |c: &Conv2d<T>| Conv2d {
            cin: c.cin,
            cout: c.cout,
            stride: c.stride,
            weight: c.weight.iter().map(|v| U::lit(v.value())).collect(),
            bias: c.bias.iter().map(|v| U::lit(v.value())).collect(),
        };
        OpticalNet { convs: self.convs.each_ref().map(conv) }
    }
}

/// Gradient buffers flattened in the same order as [`OpticalNet::params`].
pub fn grad_slices<T>(g: &Grads<T>) -> Vec<&[T]> {
    g.iter().flat_map(|c| [c.weight.as_slice(), c.bias.as_slice()]).collect()
}
