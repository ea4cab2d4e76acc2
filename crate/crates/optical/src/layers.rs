//! Layer primitives with hand-written backward passes.

use crate::tensor::{matmul, Mat, Scalar, Tensor};
use rand::Rng;

pub const KERNEL: usize = 3;

/// 3×3 convolution, zero padding 1, stride 1 or 2. Lowered to a matrix
/// product through im2col.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d<T> {
    pub cin: usize,
    pub cout: usize,
    pub stride: usize,
    /// `cout × (cin·9)`, row-major, kernel taps ordered `(ci, ky, kx)`.
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

/// Parameter gradients of one convolution.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrad<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> ConvGrad<T> {
    pub fn zeros_like(conv: &Conv2d<T>) -> Self {
        ConvGrad { weight: vec![T::zero(); conv.weight.len()], bias: vec![T::zero(); conv.bias.len()] }
    }

    pub fn add_assign(&mut self, o: &Self) {
        self.weight.iter_mut().zip(&o.weight).for_each(|(a, b)| *a += *b);
        self.bias.iter_mut().zip(&o.bias).for_each(|(a, b)| *a += *b);
    }
}

pub fn out_size(n: usize, stride: usize) -> usize {
    (n - 1) / stride + 1
}

impl<T: Scalar> Conv2d<T> {
    /// Uniform init in ±1/√fan_in for weights and biases.
    pub fn init(cin: usize, cout: usize, stride: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / ((cin * KERNEL * KERNEL) as f64).sqrt();
        let mut draw = |n: usize| (0..n).map(|_| T::lit(rng.gen_range(-bound..bound))).collect();
        let weight = draw(cout * cin * KERNEL * KERNEL);
        let bias = draw(cout);
        Conv2d { cin, cout, stride, weight, bias }
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn taps(&self) -> usize {
        self.cin * KERNEL * KERNEL
    }

    fn im2col(&self, x: &Tensor<T>) -> (Vec<T>, usize, usize) {
        let (ho, wo) = (out_size(x.h, self.stride), out_size(x.w, self.stride));
        let n = ho * wo;
        let mut cols = vec![T::zero(); self.taps() * n];
        for ci in 0..self.cin {
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let row = &mut cols[((ci * KERNEL + ky) * KERNEL + kx) * n..][..n];
                    for oy in 0..ho {
                        let iy = (oy * self.stride + ky) as isize - 1;
                        if iy < 0 || iy >= x.h as isize {
                            continue;
                        }
                        for ox in 0..wo {
                            let ix = (ox * self.stride + kx) as isize - 1;
                            if ix >= 0 && ix < x.w as isize {
                                row[oy * wo + ox] = x.at(ci, iy as usize, ix as usize);
                            }
                        }
                    }
                }
            }
        }
        (cols, ho, wo)
    }

    fn col2im(&self, cols: &[T], h: usize, w: usize, ho: usize, wo: usize) -> Tensor<T> {
        let n = ho * wo;
        let mut dx = Tensor::zeros(self.cin, h, w);
        for ci in 0..self.cin {
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let row = &cols[((ci * KERNEL + ky) * KERNEL + kx) * n..][..n];
                    for oy in 0..ho {
                        let iy = (oy * self.stride + ky) as isize - 1;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for ox in 0..wo {
                            let ix = (ox * self.stride + kx) as isize - 1;
                            if ix >= 0 && ix < w as isize {
                                *dx.at_mut(ci, iy as usize, ix as usize) += row[oy * wo + ox];
                            }
                        }
                    }
                }
            }
        }
        dx
    }

    pub fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        assert_eq!(x.c, self.cin, "conv input channels");
        let (cols, ho, wo) = self.im2col(x);
        let n = ho * wo;
        let mut y = Tensor::zeros(self.cout, ho, wo);
        for (co, b) in self.bias.iter().enumerate() {
            y.data[co * n..(co + 1) * n].iter_mut().for_each(|v| *v = *b);
        }
        matmul(Mat::new(&self.weight, self.cout, self.taps()), Mat::new(&cols, self.taps(), n), T::one(), &mut y.data);
        y
    }

    /// Accumulates parameter gradients into `grad` and returns the input gradient.
    pub fn backward(&self, x: &Tensor<T>, dy: &Tensor<T>, grad: &mut ConvGrad<T>) -> Tensor<T> {
        let (cols, ho, wo) = self.im2col(x);
        let n = ho * wo;
        assert_eq!(dy.shape(), (self.cout, ho, wo), "conv output gradient shape");
        let dy_m = Mat::new(&dy.data, self.cout, n);
        matmul(dy_m, Mat::new(&cols, self.taps(), n).t(), T::one(), &mut grad.weight);
        for (co, g) in grad.bias.iter_mut().enumerate() {
            *g += dy.data[co * n..(co + 1) * n].iter().copied().sum::<T>();
        }
        let mut dcols = vec![T::zero(); self.taps() * n];
        matmul(Mat::new(&self.weight, self.cout, self.taps()).t(), dy_m, T::zero(), &mut dcols);
        self.col2im(&dcols, x.h, x.w, ho, wo)
    }
}

#[inline]
fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// `x·σ(x)`.
pub fn silu<T: Scalar>(z: &Tensor<T>) -> Tensor<T> {
    z.map(|x| x * sigmoid(x))
}

pub fn silu_backward<T: Scalar>(z: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    z.zip_map(dy, |x, g| {
        let s = sigmoid(x);
        g * (s + x * s * (T::one() - s))
    })
}

pub fn tanh<T: Scalar>(z: &Tensor<T>) -> Tensor<T> {
    z.map(|x| x.tanh())
}

/// Gradient through `tanh`, given its output.
pub fn tanh_backward<T: Scalar>(y: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    y.zip_map(dy, |v, g| g * (T::one() - v * v))
}

/// Nearest-neighbour 2× upsampling cropped to `h × w` (handles odd sizes).
pub fn upsample<T: Scalar>(x: &Tensor<T>, h: usize, w: usize) -> Tensor<T> {
    assert!(x.h == h.div_ceil(2) && x.w == w.div_ceil(2), "upsample target does not match");
    let mut y = Tensor::zeros(x.c, h, w);
    for c in 0..x.c {
        for yy in 0..h {
            for xx in 0..w {
                *y.at_mut(c, yy, xx) = x.at(c, yy / 2, xx / 2);
            }
        }
    }
    y
}

pub fn upsample_backward<T: Scalar>(dy: &Tensor<T>, h: usize, w: usize) -> Tensor<T> {
    let mut dx = Tensor::zeros(dy.c, h, w);
    for c in 0..dy.c {
        for yy in 0..dy.h {
            for xx in 0..dy.w {
                *dx.at_mut(c, yy / 2, xx / 2) += dy.at(c, yy, xx);
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn conv_matches_direct_loop() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for stride in [1, 2] {
            let conv = Conv2d::<f64>::init(2, 3, stride, &mut rng);
            let x = Tensor::from_vec(2, 5, 4, (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let y = conv.forward(&x);
            assert_eq!(y.shape(), (3, out_size(5, stride), out_size(4, stride)));
            for co in 0..3 {
                for oy in 0..y.h {
                    for ox in 0..y.w {
                        let mut s = conv.bias[co];
                        for ci in 0..2 {
                            for ky in 0..3 {
                                for kx in 0..3 {
                                    let iy = (oy * stride + ky) as isize - 1;
                                    let ix = (ox * stride + kx) as isize - 1;
                                    if (0..5).contains(&iy) && (0..4).contains(&ix) {
                                        s += conv.weight[co * 18 + ci * 9 + ky * 3 + kx]
                                            * x.at(ci, iy as usize, ix as usize);
                                    }
                                }
                            }
                        }
                        assert!((y.at(co, oy, ox) - s).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn upsample_crops_odd_sizes() {
        let x = Tensor::from_vec(1, 2, 2, vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let y = upsample(&x, 3, 3);
        assert_eq!(y.data, vec![1.0, 1.0, 2.0, 1.0, 1.0, 2.0, 3.0, 3.0, 4.0]);
        let dx = upsample_backward(&y, 2, 2);
        assert_eq!(dx.data, vec![4.0, 4.0, 6.0, 4.0]);
    }
}
