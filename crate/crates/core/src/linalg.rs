//! Fixed-size 3D vectors and matrices over any [`Real`], plus `f64` rigid poses.

use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Vec3 { x, y, z }
    }
    #[inline]
    pub fn zero() -> Self {
        Self::splat(T::zero())
    }
    #[inline]
    pub fn splat(v: T) -> Self {
        Vec3 { x: v, y: v, z: v }
    }
    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }
    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Vec3::new(self.y * o.z - self.z * o.y, self.z * o.x - self.x * o.z, self.x * o.y - self.y * o.x)
    }
    #[inline]
    pub fn norm_sq(self) -> T {
        self.dot(self)
    }
    #[inline]
    pub fn norm(self) -> T {
        self.norm_sq().sqrt()
    }
    pub fn normalized(self) -> Self {
        self * self.norm().recip()
    }
    #[inline]
    pub fn scale(self, s: T) -> Self {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
    pub fn map<U, F: Fn(T) -> U>(self, f: F) -> Vec3<U> {
        Vec3 { x: f(self.x), y: f(self.y), z: f(self.z) }
    }
    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }
    pub fn from_array(a: [T; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
    pub fn component_min(self, o: Self) -> Self {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }
    pub fn component_max(self, o: Self) -> Self {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }
    /// Primal values.
    pub fn value(self) -> Vec3<f64> {
        self.map(|v| v.value())
    }
    pub fn lift(v: Vec3<f64>) -> Self {
        v.map(T::lit)
    }
    pub fn is_finite(self) -> bool {
        self.x.all_finite() && self.y.all_finite() && self.z.all_finite()
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    #[inline]
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl<T> IndexMut<usize> for Vec3<T> {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut T {
        match i {
            0 => &mut self.x,
            1 => &mut self.y,
            2 => &mut self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl<T: Real> SubAssign for Vec3<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        self.x -= o.x;
        self.y -= o.y;
        self.z -= o.z;
    }
}

/// Row-major 3×3 matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Mat3<T> {
    pub m: [[T; 3]; 3],
}

impl<T: Real> Mat3<T> {
    pub fn zero() -> Self {
        Mat3 { m: [[T::zero(); 3]; 3] }
    }
    pub fn identity() -> Self {
        Self::diag(T::one(), T::one(), T::one())
    }
    pub fn diag(a: T, b: T, c: T) -> Self {
        let z = T::zero();
        Mat3 { m: [[a, z, z], [z, b, z], [z, z, c]] }
    }
    pub fn from_rows(r: [[T; 3]; 3]) -> Self {
        Mat3 { m: r }
    }
    /// a bᵀ
    #[inline]
    pub fn outer(a: Vec3<T>, b: Vec3<T>) -> Self {
        Mat3 {
            m: [
                [a.x * b.x, a.x * b.y, a.x * b.z],
                [a.y * b.x, a.y * b.y, a.y * b.z],
                [a.z * b.x, a.z * b.y, a.z * b.z],
            ],
        }
    }
    #[inline]
    pub fn transpose(&self) -> Self {
        let m = &self.m;
        Mat3 { m: [[m[0][0], m[1][0], m[2][0]], [m[0][1], m[1][1], m[2][1]], [m[0][2], m[1][2], m[2][2]]] }
    }
    #[inline]
    pub fn det(&self) -> T {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }
    /// Cofactor matrix; equals det(F)·F⁻ᵀ.
    #[inline]
    pub fn cofactor(&self) -> Self {
        let m = &self.m;
        Mat3 {
            m: [
                [
                    m[1][1] * m[2][2] - m[1][2] * m[2][1],
                    m[1][2] * m[2][0] - m[1][0] * m[2][2],
                    m[1][0] * m[2][1] - m[1][1] * m[2][0],
                ],
                [
                    m[0][2] * m[2][1] - m[0][1] * m[2][2],
                    m[0][0] * m[2][2] - m[0][2] * m[2][0],
                    m[0][1] * m[2][0] - m[0][0] * m[2][1],
                ],
                [
                    m[0][1] * m[1][2] - m[0][2] * m[1][1],
                    m[0][2] * m[1][0] - m[0][0] * m[1][2],
                    m[0][0] * m[1][1] - m[0][1] * m[1][0],
                ],
            ],
        }
    }
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d.value() == 0.0 || !d.value().is_finite() {
            return None;
        }
        Some(self.cofactor().transpose() * d.recip())
    }
    pub fn trace(&self) -> T {
        self.m[0][0] + self.m[1][1] + self.m[2][2]
    }
    pub fn frobenius_sq(&self) -> T {
        let mut s = T::zero();
        for r in &self.m {
            for v in r {
                s += *v * *v;
            }
        }
        s
    }
    #[inline]
    pub fn mul_vec(&self, v: Vec3<T>) -> Vec3<T> {
        let m = &self.m;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }
    pub fn map<U: Copy + Default, F: Fn(T) -> U>(&self, f: F) -> Mat3<U> {
        let mut out = [[U::default(); 3]; 3];
        for (i, row) in self.m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                out[i][j] = f(*v);
            }
        }
        Mat3 { m: out }
    }
    pub fn value(&self) -> Mat3<f64> {
        self.map(|v| v.value())
    }
    pub fn lift(m: Mat3<f64>) -> Self {
        m.map(T::lit)
    }
    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.all_finite())
    }

    /// Rotation factor of the polar decomposition `F = R S` (det F > 0).
    ///
    /// Scaled Newton iteration `X ← ½(γX + γ⁻¹X⁻ᵀ)`. The loop stops on the
    /// primal residual and then runs one more sweep so tangent channels settle.
    pub fn polar_rotation(&self) -> Option<Self> {
        let mut x = *self;
        let mut converged = false;
        for _ in 0..40 {
            let cof = x.cofactor();
            let det = x.det();
            if det.value() <= 0.0 {
                return None;
            }
            let inv_t = cof * det.recip();
            let gamma = (inv_t.frobenius_sq() / x.frobenius_sq()).sqrt().sqrt();
            let next = (x * gamma + inv_t * gamma.recip()) * T::lit(0.5);
            let diff = (next - x).value().frobenius_sq();
            x = next;
            if converged {
                break;
            }
            if diff < 1e-28 {
                converged = true;
            }
        }
        Some(x)
    }
}

impl<T: Real> Add for Mat3<T> {
    type Output = Self;
    #[inline]
    fn add(mut self, o: Self) -> Self {
        for i in 0..3 {
            for j in 0..3 {
                self.m[i][j] += o.m[i][j];
            }
        }
        self
    }
}

impl<T: Real> Sub for Mat3<T> {
    type Output = Self;
    #[inline]
    fn sub(mut self, o: Self) -> Self {
        for i in 0..3 {
            for j in 0..3 {
                self.m[i][j] -= o.m[i][j];
            }
        }
        self
    }
}

impl<T: Real> AddAssign for Mat3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Mul<T> for Mat3<T> {
    type Output = Self;
    #[inline]
    fn mul(mut self, s: T) -> Self {
        for r in self.m.iter_mut() {
            for v in r.iter_mut() {
                *v *= s;
            }
        }
        self
    }
}

impl<T: Real> Mul<Vec3<T>> for Mat3<T> {
    type Output = Vec3<T>;
    #[inline]
    fn mul(self, v: Vec3<T>) -> Vec3<T> {
        self.mul_vec(v)
    }
}

impl<T: Real> Mul for Mat3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let mut out = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j] + self.m[i][2] * o.m[2][j];
            }
        }
        out
    }
}

/// Unit quaternion (w, x, y, z) in `f64`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quat {
    fn default() -> Self {
        Quat::IDENTITY
    }
}

impl Quat {
    pub const IDENTITY: Quat = Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }
    }

    pub fn from_axis_angle(axis: Vec3<f64>, angle: f64) -> Self {
        let a = axis.normalized();
        let (s, c) = (0.5 * angle).sin_cos();
        Quat::new(c, a.x * s, a.y * s, a.z * s)
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Quat::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn conjugate(&self) -> Self {
        Quat::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn dot(&self, o: &Quat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn mul(&self, o: &Quat) -> Quat {
        Quat::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }

    pub fn to_matrix(&self) -> Mat3<f64> {
        let Quat { w, x, y, z } = *self;
        Mat3::from_rows([
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ])
    }

    pub fn rotate(&self, v: Vec3<f64>) -> Vec3<f64> {
        self.to_matrix() * v
    }

    /// Shortest-arc spherical interpolation.
    pub fn slerp(&self, other: &Quat, t: f64) -> Quat {
        let mut b = *other;
        let mut d = self.dot(&b);
        if d < 0.0 {
            b = Quat::new(-b.w, -b.x, -b.y, -b.z);
            d = -d;
        }
        if d > 1.0 - 1e-12 {
            let q = Quat::new(
                self.w + t * (b.w - self.w),
                self.x + t * (b.x - self.x),
                self.y + t * (b.y - self.y),
                self.z + t * (b.z - self.z),
            );
            return q.normalized();
        }
        let theta = d.clamp(-1.0, 1.0).acos();
        let s = theta.sin();
        let wa = ((1.0 - t) * theta).sin() / s;
        let wb = (t * theta).sin() / s;
        Quat::new(wa * self.w + wb * b.w, wa * self.x + wb * b.x, wa * self.y + wb * b.y, wa * self.z + wb * b.z)
    }

    /// Rotation vector (axis × angle) of this quaternion, shortest arc.
    pub fn to_rotation_vector(&self) -> Vec3<f64> {
        let q = if self.w < 0.0 { Quat::new(-self.w, -self.x, -self.y, -self.z) } else { *self };
        let v = Vec3::new(q.x, q.y, q.z);
        let s = v.norm();
        if s < 1e-15 {
            return v * 2.0;
        }
        let angle = 2.0 * s.atan2(q.w);
        v * (angle / s)
    }
}

/// Rigid transform: `world = rotation · local + translation`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub translation: Vec3<f64>,
    pub rotation: Quat,
}

impl Pose {
    pub fn from_translation(t: Vec3<f64>) -> Self {
        Pose { translation: t, rotation: Quat::IDENTITY }
    }

    pub fn new(translation: Vec3<f64>, rotation: Quat) -> Self {
        Pose { translation, rotation }
    }

    pub fn transform_point(&self, p: Vec3<f64>) -> Vec3<f64> {
        self.rotation.rotate(p) + self.translation
    }

    pub fn inverse_transform_point(&self, p: Vec3<f64>) -> Vec3<f64> {
        self.rotation.conjugate().rotate(p - self.translation)
    }

    pub fn rotate_vector(&self, v: Vec3<f64>) -> Vec3<f64> {
        self.rotation.rotate(v)
    }

    pub fn inverse_rotate_vector(&self, v: Vec3<f64>) -> Vec3<f64> {
        self.rotation.conjugate().rotate(v)
    }
}
