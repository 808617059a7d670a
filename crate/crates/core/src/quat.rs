//! Scalar-first unit quaternions and attitude kinematics.
//!
//! A quaternion is stored as `(m, n)` where `m` is the scalar part and `n`
//! the vector part. The sign of a quaternion is never normalized: `q` and
//! `-q` describe the same attitude but are distinct values here, and the
//! switching controller depends on that distinction.

use std::f64::consts::{PI, TAU};
use std::ops::{Mul, Neg};

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Drift in `m² + ‖n‖²` above which products are renormalized.
pub const RENORM_THRESHOLD: f64 = 1e-12;

/// Tolerance accepted when constructing a quaternion from raw components.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Tolerance on the length of an axis-angle axis.
pub const AXIS_TOLERANCE: f64 = 1e-12;

pub fn b3() -> Vec3 {
    Vec3::z()
}

/// Unit quaternion `[m n]ᵀ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitQuaternion {
    m: f64,
    n: Vec3,
}

/// Rotation by `angle` radians about the unit vector `axis`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisAngle {
    axis: Vec3,
    angle: f64,
}

/// Raw (non-unit) quaternion derivative, scalar first.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuatRate {
    pub m: f64,
    pub n: Vec3,
}

impl QuatRate {
    pub fn as_array(&self) -> [f64; 4] {
        [self.m, self.n.x, self.n.y, self.n.z]
    }
}

impl AxisAngle {
    pub fn new(axis: Vec3, angle: f64) -> Result<Self> {
        let norm = axis.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > AXIS_TOLERANCE {
            return Err(Error::NonUnitAxis { norm });
        }
        if !angle.is_finite() || angle <= -TAU || angle > TAU {
            return Err(Error::AngleOutOfRange { angle });
        }
        Ok(Self { axis, angle })
    }

    pub fn axis(&self) -> Vec3 {
        self.axis
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }
}

impl UnitQuaternion {
    pub fn identity() -> Self {
        Self {
            m: 1.0,
            n: Vec3::zeros(),
        }
    }

    /// Builds a quaternion from components that must already be unit within
    /// [`UNIT_TOLERANCE`]. Small drift is removed without changing sign.
    pub fn new(m: f64, n: Vec3) -> Result<Self> {
        let norm = (m * m + n.norm_squared()).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::NonUnitQuaternion { norm });
        }
        Ok(Self::from_parts_unchecked(m, n).renormalized())
    }

    /// Normalizes arbitrary nonzero components by their (positive) norm.
    pub fn normalize(m: f64, n: Vec3) -> Result<Self> {
        let norm = (m * m + n.norm_squared()).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::NonUnitQuaternion { norm });
        }
        Ok(Self { m: m / norm, n: n / norm })
    }

    pub(crate) fn from_parts_unchecked(m: f64, n: Vec3) -> Self {
        Self { m, n }
    }

    pub fn from_axis_angle(aa: &AxisAngle) -> Self {
        let half = 0.5 * aa.angle;
        Self {
            m: half.cos(),
            n: aa.axis * half.sin(),
        }
    }

    /// Rotation about `b₃` by `angle` radians, accumulated continuously so that
    /// angles beyond π produce a negative scalar part.
    pub fn about_b3(angle: f64) -> Self {
        let half = 0.5 * angle;
        Self {
            m: half.cos(),
            n: Vec3::new(0.0, 0.0, half.sin()),
        }
    }

    /// Inverse of [`Self::from_axis_angle`]. The returned angle lies in
    /// `[0, 2π]`; the identity maps to angle 0 about `b₃`.
    pub fn to_axis_angle(&self) -> AxisAngle {
        let s = self.n.norm();
        if s == 0.0 {
            let angle = if self.m >= 0.0 { 0.0 } else { TAU };
            return AxisAngle { axis: b3(), angle };
        }
        AxisAngle {
            axis: self.n / s,
            angle: 2.0 * s.atan2(self.m),
        }
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn n(&self) -> Vec3 {
        self.n
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.m, self.n.x, self.n.y, self.n.z]
    }

    pub fn norm_drift(&self) -> f64 {
        (self.m * self.m + self.n.norm_squared() - 1.0).abs()
    }

    pub fn inverse(&self) -> Self {
        Self {
            m: self.m,
            n: -self.n,
        }
    }

    /// Hamilton product `self ⊗ rhs`.
    pub fn mul(&self, rhs: &Self) -> Self {
        let (m, n) = hamilton(self.m, &self.n, rhs.m, &rhs.n);
        Self { m, n }.renormalized()
    }

    /// Rotates `v` by this quaternion: the vector part of `q ⊗ [0 v] ⊗ q⁻¹`.
    pub fn rotate_vector(&self, v: &Vec3) -> Vec3 {
        let t = 2.0 * self.n.cross(v);
        v + self.m * t + self.n.cross(&t)
    }

    /// Z-Y-X yaw angle in `(-π, π]`.
    pub fn yaw(&self) -> f64 {
        let n = &self.n;
        let psi = (2.0 * (self.m * n.z + n.x * n.y)).atan2(1.0 - 2.0 * (n.y * n.y + n.z * n.z));
        if psi <= -PI {
            psi + TAU
        } else {
            psi
        }
    }

    /// `½ q ⊗ [0 ω]ᵀ`, not renormalized.
    pub fn kinematics(&self, omega: &Vec3) -> QuatRate {
        let (m, n) = hamilton(self.m, &self.n, 0.0, omega);
        QuatRate {
            m: 0.5 * m,
            n: 0.5 * n,
        }
    }

    /// Euclidean inner product of the components.
    pub fn dot_rate(&self, rate: &QuatRate) -> f64 {
        self.m * rate.m + self.n.dot(&rate.n)
    }

    fn renormalized(self) -> Self {
        let sq = self.m * self.m + self.n.norm_squared();
        if (sq - 1.0).abs() > RENORM_THRESHOLD {
            let norm = sq.sqrt();
            Self {
                m: self.m / norm,
                n: self.n / norm,
            }
        } else {
            self
        }
    }

    /// Sign-preserving normalization regardless of drift size.
    pub(crate) fn force_normalized(self) -> Self {
        let norm = (self.m * self.m + self.n.norm_squared()).sqrt();
        Self {
            m: self.m / norm,
            n: self.n / norm,
        }
    }
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;

    fn mul(self, rhs: Self) -> Self::Output {
        UnitQuaternion::mul(&self, &rhs)
    }
}

impl Neg for UnitQuaternion {
    type Output = UnitQuaternion;

    fn neg(self) -> Self::Output {
        Self {
            m: -self.m,
            n: -self.n,
        }
    }
}

/// Raw Hamilton product on scalar-first components.
pub fn hamilton(am: f64, an: &Vec3, bm: f64, bn: &Vec3) -> (f64, Vec3) {
    (am * bm - an.dot(bn), am * bn + bm * an + an.cross(bn))
}

pub fn quat_mul(a: &UnitQuaternion, b: &UnitQuaternion) -> UnitQuaternion {
    a.mul(b)
}

pub fn quat_inverse(q: &UnitQuaternion) -> UnitQuaternion {
    q.inverse()
}

pub fn from_axis_angle(aa: &AxisAngle) -> UnitQuaternion {
    UnitQuaternion::from_axis_angle(aa)
}

pub fn to_axis_angle(q: &UnitQuaternion) -> AxisAngle {
    q.to_axis_angle()
}

pub fn rotate_vector(q: &UnitQuaternion, v: &Vec3) -> Vec3 {
    q.rotate_vector(v)
}

pub fn yaw_of(q: &UnitQuaternion) -> f64 {
    q.yaw()
}

pub fn quat_kinematics(q: &UnitQuaternion, omega: &Vec3) -> QuatRate {
    q.kinematics(omega)
}

/// Skew-symmetric cross-product matrix `[v]ₓ`.
pub fn skew(v: &Vec3) -> nalgebra::Matrix3<f64> {
    v.cross_matrix()
}
