//! Scalar abstraction shared by the simulator, the camera and the metrics.
//!
//! Everything numeric in the simulation path is written against [`Real`], so the
//! same rollout code runs on plain `f64` and on [`Dual`] numbers that carry
//! forward-mode tangents with respect to the material parameters.

use num_traits::{Float, FromPrimitive, Num, NumCast, One, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::num::FpCategory;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, Sub, SubAssign};

/// Floating point scalar usable throughout the simulation.
pub trait Real:
    Float
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Lift a constant.
    fn lit(x: f64) -> Self;
    /// Primal value; used for control flow (floor, comparisons, aborts).
    fn value(self) -> f64;
    /// True when every component (primal and tangents) is finite.
    fn all_finite(self) -> bool {
        self.value().is_finite()
    }
}

impl Real for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn value(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
}

/// Forward-mode dual number with `N` tangent channels.
///
/// Comparisons look at the primal part only; `min`/`max`/`abs` pick the branch
/// by primal value and carry that branch's tangents.
#[derive(Clone, Copy, PartialEq)]
pub struct Dual<T, const N: usize> {
    pub re: T,
    pub eps: [T; N],
}

impl<T: Float, const N: usize> Dual<T, N> {
    #[inline]
    pub fn constant(re: T) -> Self {
        Dual { re, eps: [T::zero(); N] }
    }

    /// A seeded variable: tangent 1 in channel `k`.
    pub fn variable(re: T, k: usize) -> Self {
        let mut eps = [T::zero(); N];
        eps[k] = T::one();
        Dual { re, eps }
    }

    #[inline]
    pub fn new(re: T, eps: [T; N]) -> Self {
        Dual { re, eps }
    }

    /// Chain rule for a unary function with value `f` and derivative `df`.
    #[inline]
    fn chain(self, f: T, df: T) -> Self {
        let mut eps = self.eps;
        for e in eps.iter_mut() {
            *e = *e * df;
        }
        Dual { re: f, eps }
    }
}

impl<T: Float + fmt::Debug, const N: usize> fmt::Debug for Dual<T, N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dual({:?}, {:?})", self.re, self.eps)
    }
}

impl<T: Float + fmt::Display, const N: usize> fmt::Display for Dual<T, N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.re)?;
        for (k, e) in self.eps.iter().enumerate() {
            write!(f, " + {}ε{}", e, k)?;
        }
        Ok(())
    }
}

impl<T: Float, const N: usize> Default for Dual<T, N> {
    fn default() -> Self {
        Self::constant(T::zero())
    }
}

impl<T: Float, const N: usize> PartialOrd for Dual<T, N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.re.partial_cmp(&other.re)
    }
}

impl<T: Float, const N: usize> Neg for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.chain(-self.re, -T::one())
    }
}

impl<T: Float, const N: usize> Add for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self.re = self.re + rhs.re;
        for k in 0..N {
            self.eps[k] = self.eps[k] + rhs.eps[k];
        }
        self
    }
}

impl<T: Float, const N: usize> Sub for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self.re = self.re - rhs.re;
        for k in 0..N {
            self.eps[k] = self.eps[k] - rhs.eps[k];
        }
        self
    }
}

impl<T: Float, const N: usize> Mul for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut eps = [T::zero(); N];
        for k in 0..N {
            eps[k] = self.eps[k] * rhs.re + self.re * rhs.eps[k];
        }
        Dual { re: self.re * rhs.re, eps }
    }
}

impl<T: Float, const N: usize> Div for Dual<T, N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = T::one() / rhs.re;
        let re = self.re * inv;
        let mut eps = [T::zero(); N];
        for k in 0..N {
            eps[k] = (self.eps[k] - re * rhs.eps[k]) * inv;
        }
        Dual { re, eps }
    }
}

impl<T: Float, const N: usize> Rem for Dual<T, N> {
    type Output = Self;
    // d/dx (x mod y) = 1 almost everywhere; the y-derivative is -trunc(x/y).
    fn rem(self, rhs: Self) -> Self {
        let q = (self.re / rhs.re).trunc();
        let mut out = self - rhs * Self::constant(q);
        out.re = self.re % rhs.re;
        out
    }
}

macro_rules! assign_op {
    ($tr:ident, $m:ident, $op:tt) => {
        impl<T: Float, const N: usize> $tr for Dual<T, N> {
            #[inline]
            fn $m(&mut self, rhs: Self) {
                *self = *self $op rhs;
            }
        }
    };
}
assign_op!(AddAssign, add_assign, +);
assign_op!(SubAssign, sub_assign, -);
assign_op!(MulAssign, mul_assign, *);
assign_op!(DivAssign, div_assign, /);

impl<T: Float, const N: usize> Sum for Dual<T, N> {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), |a, b| a + b)
    }
}

impl<T: Float, const N: usize> Zero for Dual<T, N> {
    fn zero() -> Self {
        Self::constant(T::zero())
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.eps.iter().all(|e| e.is_zero())
    }
}

impl<T: Float, const N: usize> One for Dual<T, N> {
    fn one() -> Self {
        Self::constant(T::one())
    }
}

impl<T: Float, const N: usize> Num for Dual<T, N> {
    type FromStrRadixErr = T::FromStrRadixErr;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        T::from_str_radix(s, radix).map(Self::constant)
    }
}

impl<T: Float, const N: usize> ToPrimitive for Dual<T, N> {
    fn to_i64(&self) -> Option<i64> {
        self.re.to_i64()
    }
    fn to_u64(&self) -> Option<u64> {
        self.re.to_u64()
    }
    fn to_f64(&self) -> Option<f64> {
        self.re.to_f64()
    }
}

impl<T: Float, const N: usize> NumCast for Dual<T, N> {
    fn from<P: ToPrimitive>(n: P) -> Option<Self> {
        T::from(n).map(Self::constant)
    }
}

impl<T: Float + FromPrimitive, const N: usize> FromPrimitive for Dual<T, N> {
    fn from_i64(n: i64) -> Option<Self> {
        T::from_i64(n).map(Self::constant)
    }
    fn from_u64(n: u64) -> Option<Self> {
        T::from_u64(n).map(Self::constant)
    }
    fn from_f64(n: f64) -> Option<Self> {
        T::from_f64(n).map(Self::constant)
    }
}

impl<T: Float, const N: usize> Float for Dual<T, N> {
    fn nan() -> Self {
        Self::constant(T::nan())
    }
    fn infinity() -> Self {
        Self::constant(T::infinity())
    }
    fn neg_infinity() -> Self {
        Self::constant(T::neg_infinity())
    }
    fn neg_zero() -> Self {
        Self::constant(T::neg_zero())
    }
    fn min_value() -> Self {
        Self::constant(T::min_value())
    }
    fn min_positive_value() -> Self {
        Self::constant(T::min_positive_value())
    }
    fn max_value() -> Self {
        Self::constant(T::max_value())
    }
    fn epsilon() -> Self {
        Self::constant(T::epsilon())
    }
    fn is_nan(self) -> bool {
        self.re.is_nan()
    }
    fn is_infinite(self) -> bool {
        self.re.is_infinite()
    }
    fn is_finite(self) -> bool {
        self.re.is_finite()
    }
    fn is_normal(self) -> bool {
        self.re.is_normal()
    }
    fn classify(self) -> FpCategory {
        self.re.classify()
    }
    // Piecewise-constant functions have zero derivative.
    fn floor(self) -> Self {
        Self::constant(self.re.floor())
    }
    fn ceil(self) -> Self {
        Self::constant(self.re.ceil())
    }
    fn round(self) -> Self {
        Self::constant(self.re.round())
    }
    fn trunc(self) -> Self {
        Self::constant(self.re.trunc())
    }
    fn fract(self) -> Self {
        let mut out = self;
        out.re = self.re.fract();
        out
    }
    fn abs(self) -> Self {
        if self.re < T::zero() {
            -self
        } else {
            self
        }
    }
    fn signum(self) -> Self {
        Self::constant(self.re.signum())
    }
    fn is_sign_positive(self) -> bool {
        self.re.is_sign_positive()
    }
    fn is_sign_negative(self) -> bool {
        self.re.is_sign_negative()
    }
    fn mul_add(self, a: Self, b: Self) -> Self {
        self * a + b
    }
    fn recip(self) -> Self {
        let r = self.re.recip();
        self.chain(r, -r * r)
    }
    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Self::one();
        }
        let pm1 = self.re.powi(n - 1);
        self.chain(pm1 * self.re, T::from(n).unwrap() * pm1)
    }
    fn powf(self, n: Self) -> Self {
        // x^n = exp(n ln x); handles tangents on both operands.
        if n.eps.iter().all(|e| e.is_zero()) {
            let p = self.re.powf(n.re);
            let d = if self.re.is_zero() { T::zero() } else { n.re * p / self.re };
            return self.chain(p, d);
        }
        (n * self.ln()).exp()
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        let d = if s > T::zero() { T::one() / (s + s) } else { T::zero() };
        self.chain(s, d)
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }
    fn exp2(self) -> Self {
        let e = self.re.exp2();
        self.chain(e, e * T::from(std::f64::consts::LN_2).unwrap())
    }
    fn ln(self) -> Self {
        self.chain(self.re.ln(), self.re.recip())
    }
    fn log(self, base: Self) -> Self {
        self.ln() / base.ln()
    }
    fn log2(self) -> Self {
        self.chain(self.re.log2(), (self.re * T::from(std::f64::consts::LN_2).unwrap()).recip())
    }
    fn log10(self) -> Self {
        self.chain(self.re.log10(), (self.re * T::from(std::f64::consts::LN_10).unwrap()).recip())
    }
    fn max(self, other: Self) -> Self {
        if other.re > self.re || self.re.is_nan() {
            other
        } else {
            self
        }
    }
    fn min(self, other: Self) -> Self {
        if other.re < self.re || self.re.is_nan() {
            other
        } else {
            self
        }
    }
    fn abs_sub(self, other: Self) -> Self {
        if self.re <= other.re {
            Self::zero()
        } else {
            self - other
        }
    }
    fn cbrt(self) -> Self {
        let c = self.re.cbrt();
        let d = if c.is_zero() { T::zero() } else { T::one() / (T::from(3.0).unwrap() * c * c) };
        self.chain(c, d)
    }
    fn hypot(self, other: Self) -> Self {
        (self * self + other * other).sqrt()
    }
    fn sin(self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    fn tan(self) -> Self {
        let t = self.re.tan();
        self.chain(t, T::one() + t * t)
    }
    fn asin(self) -> Self {
        self.chain(self.re.asin(), (T::one() - self.re * self.re).sqrt().recip())
    }
    fn acos(self) -> Self {
        self.chain(self.re.acos(), -(T::one() - self.re * self.re).sqrt().recip())
    }
    fn atan(self) -> Self {
        self.chain(self.re.atan(), (T::one() + self.re * self.re).recip())
    }
    fn atan2(self, other: Self) -> Self {
        // d atan2(y, x) = (x dy - y dx) / (x² + y²)
        let r2 = self.re * self.re + other.re * other.re;
        let mut eps = [T::zero(); N];
        for k in 0..N {
            eps[k] = (other.re * self.eps[k] - self.re * other.eps[k]) / r2;
        }
        Dual { re: self.re.atan2(other.re), eps }
    }
    fn sin_cos(self) -> (Self, Self) {
        (self.sin(), self.cos())
    }
    fn exp_m1(self) -> Self {
        self.chain(self.re.exp_m1(), self.re.exp())
    }
    fn ln_1p(self) -> Self {
        self.chain(self.re.ln_1p(), (T::one() + self.re).recip())
    }
    fn sinh(self) -> Self {
        self.chain(self.re.sinh(), self.re.cosh())
    }
    fn cosh(self) -> Self {
        self.chain(self.re.cosh(), self.re.sinh())
    }
    fn tanh(self) -> Self {
        let t = self.re.tanh();
        self.chain(t, T::one() - t * t)
    }
    fn asinh(self) -> Self {
        self.chain(self.re.asinh(), (self.re * self.re + T::one()).sqrt().recip())
    }
    fn acosh(self) -> Self {
        self.chain(self.re.acosh(), (self.re * self.re - T::one()).sqrt().recip())
    }
    fn atanh(self) -> Self {
        self.chain(self.re.atanh(), (T::one() - self.re * self.re).recip())
    }
    fn integer_decode(self) -> (u64, i16, i8) {
        self.re.integer_decode()
    }
}

impl<T: Real, const N: usize> Real for Dual<T, N> {
    #[inline]
    fn lit(x: f64) -> Self {
        Self::constant(T::lit(x))
    }
    #[inline]
    fn value(self) -> f64 {
        self.re.value()
    }
    fn all_finite(self) -> bool {
        self.re.all_finite() && self.eps.iter().all(|e| e.all_finite())
    }
}

/// Tangent channels of a scalar, or an empty slice for plain floats.
pub trait Tangents {
    fn tangents(&self) -> Vec<f64>;
}

impl Tangents for f64 {
    fn tangents(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl<const N: usize> Tangents for Dual<f64, N> {
    fn tangents(&self) -> Vec<f64> {
        self.eps.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type D2 = Dual<f64, 2>;

    fn fd<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn unary_derivatives_match_finite_differences() {
        let fs: Vec<(fn(D2) -> D2, fn(f64) -> f64)> = vec![
            (|x| x.sqrt(), |x| x.sqrt()),
            (|x| x.exp(), |x| x.exp()),
            (|x| x.ln(), |x| x.ln()),
            (|x| x.sin(), |x| x.sin()),
            (|x| x.cos(), |x| x.cos()),
            (|x| x.tanh(), |x| x.tanh()),
            (|x| x.recip(), |x| x.recip()),
            (|x| x.powi(3), |x| x.powi(3)),
            (|x| x.powf(D2::constant(1.7)), |x| x.powf(1.7)),
            (|x| x.cbrt(), |x| x.cbrt()),
            (|x| x.atan(), |x| x.atan()),
            (|x| x.log10(), |x| x.log10()),
        ];
        for x in [0.3, 0.9, 2.5] {
            for (fd_, ff) in &fs {
                let d = fd_(D2::variable(x, 0));
                assert!((d.re - ff(x)).abs() < 1e-14);
                let expect = fd(ff, x);
                assert!((d.eps[0] - expect).abs() < 1e-6 * (1.0 + expect.abs()), "x={x}");
                assert_eq!(d.eps[1], 0.0);
            }
        }
    }

    #[test]
    fn binary_ops_track_both_channels() {
        let a = D2::variable(1.5, 0);
        let b = D2::variable(-0.5, 1);
        let f = a * a / (b + D2::constant(2.0)) - a.atan2(b);
        let g = |x: f64, y: f64| x * x / (y + 2.0) - x.atan2(y);
        let h = 1e-6;
        let dx = (g(1.5 + h, -0.5) - g(1.5 - h, -0.5)) / (2.0 * h);
        let dy = (g(1.5, -0.5 + h) - g(1.5, -0.5 - h)) / (2.0 * h);
        assert!((f.eps[0] - dx).abs() < 1e-7);
        assert!((f.eps[1] - dy).abs() < 1e-7);
    }

    #[test]
    fn quadratic_stand_in_has_exact_gradient() {
        let le = D2::variable(9.2, 0);
        let nu = D2::variable(0.41, 1);
        let f = (le - D2::lit(10.0)).powi(2) + (nu - D2::lit(0.3)).powi(2);
        assert!((f.eps[0] - 2.0 * (9.2 - 10.0)).abs() < 1e-14);
        assert!((f.eps[1] - 2.0 * (0.41 - 0.3)).abs() < 1e-14);
    }

    #[test]
    fn comparisons_use_primal_part() {
        let a = D2::new(1.0, [5.0, 0.0]);
        let b = D2::new(2.0, [-5.0, 0.0]);
        assert!(a < b);
        assert_eq!(a.max(b).eps, [-5.0, 0.0]);
        assert_eq!(a.min(b).eps, [5.0, 0.0]);
        assert_eq!(D2::new(-3.0, [1.0, 2.0]).abs().eps, [-1.0, -2.0]);
    }
}
