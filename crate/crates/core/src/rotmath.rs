//! Quaternion and rotation-vector primitives.
//!
//! Conventions used throughout the crate:
//!
//! * quaternions are stored scalar first, `(q0, q1, q2, q3)`;
//! * the product is the Hamilton product, so `R(p ⊙ q) = R(p) R(q)`;
//! * an orientation quaternion `q^nb` rotates body-frame vectors into the
//!   navigation frame, `v^n = R(q^nb) v^b`, and `q^bn = conj(q^nb)`;
//! * a rotation vector `η` (axis times angle) maps to the quaternion
//!   `exp_q(η / 2)` and to the matrix `exp_R(η)`.

use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat3, Matrix, Vec3};
use crate::scalar::Scalar;

pub type RotMat<S = f64> = Mat3<S>;

/// Below this angle `exp_q` and `exp_R` use their series expansions.
pub const SMALL_ANGLE: f64 = 1e-10;

/// `1 − |sin(pitch)|` below which [`quat_to_euler`] treats pitch as ±90°.
pub const GIMBAL_LOCK_TOL: f64 = 1e-15;

/// Tolerance on `|q|` accepted by [`quat_to_rotmat`].
pub const UNIT_NORM_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quaternion<S = f64> {
    pub q0: S,
    pub qv: Vec3<S>,
}

impl<S: Scalar> Quaternion<S> {
    #[inline]
    pub fn new(q0: S, q1: S, q2: S, q3: S) -> Self {
        Self {
            q0,
            qv: Vec3::new(q1, q2, q3),
        }
    }

    #[inline]
    pub fn from_parts(q0: S, qv: Vec3<S>) -> Self {
        Self { q0, qv }
    }

    pub fn identity() -> Self {
        Self::from_parts(S::one(), Vec3::zero())
    }

    pub fn from_f64(q: Quaternion<f64>) -> Self {
        Self::from_parts(S::from_f64(q.q0), Vec3::from_f64(q.qv))
    }

    pub fn to_f64(self) -> Quaternion<f64> {
        Quaternion::from_parts(self.q0.to_f64(), self.qv.to_f64())
    }

    pub fn to_array(self) -> [S; 4] {
        [self.q0, self.qv.x, self.qv.y, self.qv.z]
    }

    pub fn from_array(a: [S; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    #[inline]
    pub fn conj(self) -> Self {
        Self::from_parts(self.q0, -self.qv)
    }

    #[inline]
    pub fn norm_squared(self) -> S {
        self.q0 * self.q0 + self.qv.norm_squared()
    }

    #[inline]
    pub fn norm(self) -> S {
        self.norm_squared().sqrt()
    }

    /// Rescales to unit norm. A zero quaternion is returned unchanged.
    #[inline]
    pub fn normalize(self) -> Self {
        let n = self.norm();
        if n.to_f64() == 0.0 {
            return self;
        }
        let inv = S::one() / n;
        self.scale(inv)
    }

    #[inline]
    pub fn scale(self, k: S) -> Self {
        Self::from_parts(self.q0 * k, self.qv.scale(k))
    }

    pub fn is_finite(self) -> bool {
        self.q0.is_finite() && self.qv.is_finite()
    }

    /// `R(q)`, without checking that `q` has unit norm.
    pub fn rotation_matrix(self) -> RotMat<S> {
        let one = S::one();
        let two = S::from_f64(2.0);
        let (w, x, y, z) = (self.q0, self.qv.x, self.qv.y, self.qv.z);
        Matrix([
            [
                one - two * (y * y + z * z),
                two * (x * y - w * z),
                two * (x * z + w * y),
            ],
            [
                two * (x * y + w * z),
                one - two * (x * x + z * z),
                two * (y * z - w * x),
            ],
            [
                two * (x * z - w * y),
                two * (y * z + w * x),
                one - two * (x * x + y * y),
            ],
        ])
    }

    /// `R(q) v`.
    pub fn rotate(self, v: Vec3<S>) -> Vec3<S> {
        self.rotation_matrix().mul_vec(v)
    }

    /// `R(q)ᵀ v`, i.e. rotation by the conjugate.
    pub fn rotate_inverse(self, v: Vec3<S>) -> Vec3<S> {
        self.rotation_matrix().transpose().mul_vec(v)
    }

    /// `S(q) w`, the derivative of `q ⊙ exp_q(t w / 2)` at `t = 0` times two.
    #[inline]
    pub fn s_mul(self, w: Vec3<S>) -> Self {
        Self::from_parts(-self.qv.dot(w), w.scale(self.q0) + self.qv.cross(w))
    }
}

impl<S: Scalar> Add for Quaternion<S> {
    type Output = Self;

    #[inline]
    fn add(self, o: Self) -> Self {
        Self::from_parts(self.q0 + o.q0, self.qv + o.qv)
    }
}

impl<S: Scalar> Mul for Quaternion<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        quat_mul(self, rhs)
    }
}

/// Hamilton product `a ⊙ b`.
#[inline]
pub fn quat_mul<S: Scalar>(a: Quaternion<S>, b: Quaternion<S>) -> Quaternion<S> {
    Quaternion::from_parts(
        a.q0 * b.q0 - a.qv.dot(b.qv),
        b.qv.scale(a.q0) + a.qv.scale(b.q0) + a.qv.cross(b.qv),
    )
}

/// `exp_q(y) = (cos α, sin α · y/α)` with `α = |y|`.
pub fn quat_exp<S: Scalar>(y: Vec3<S>) -> Quaternion<S> {
    let alpha = y.norm();
    if alpha.to_f64() < SMALL_ANGLE {
        let a2 = alpha * alpha;
        let q = Quaternion::from_parts(
            S::one() - a2 * S::from_f64(0.5),
            y.scale(S::one() - a2 / S::from_f64(6.0)),
        );
        return q.normalize();
    }
    let k = alpha.sin() / alpha;
    Quaternion::from_parts(alpha.cos(), y.scale(k))
}

/// `S(q)` as a 4×3 matrix: top row `-qvᵀ`, lower block `q0 I + [qv ×]`.
pub fn s_matrix<S: Scalar>(q: Quaternion<S>) -> Matrix<S, 4, 3> {
    let lower = Mat3::identity().scale(q.q0) + q.qv.skew();
    let mut s = Matrix::zeros();
    s.0[0] = [-q.qv.x, -q.qv.y, -q.qv.z];
    s.0[1..].copy_from_slice(&lower.0);
    s
}

/// `R(q)` for a unit quaternion.
pub fn quat_to_rotmat<S: Scalar>(q: Quaternion<S>) -> Result<RotMat<S>> {
    let norm = q.norm().to_f64();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::NonUnitQuaternion { norm });
    }
    Ok(q.rotation_matrix())
}

/// Rodrigues' formula `I + sin α [v ×] + (1 - cos α) [v ×]²`.
pub fn exp_r<S: Scalar>(eta: Vec3<S>) -> RotMat<S> {
    let alpha = eta.norm();
    let k = eta.skew();
    let k2 = k * k;
    if alpha.to_f64() < SMALL_ANGLE {
        return Mat3::identity() + k + k2.scale(S::from_f64(0.5));
    }
    let inv = S::one() / alpha;
    let v = eta.scale(inv).skew();
    Mat3::identity() + v.scale(alpha.sin()) + (v * v).scale(S::one() - alpha.cos())
}

/// Unit quaternion from a proper rotation matrix (Shepperd's method).
pub fn rotmat_to_quat(r: &RotMat) -> Quaternion {
    let m = &r.0;
    let tr = m[0][0] + m[1][1] + m[2][2];
    let q = if tr > m[0][0] && tr > m[1][1] && tr > m[2][2] {
        let s = 2.0 * (1.0 + tr).sqrt();
        Quaternion::new(
            0.25 * s,
            (m[2][1] - m[1][2]) / s,
            (m[0][2] - m[2][0]) / s,
            (m[1][0] - m[0][1]) / s,
        )
    } else if m[0][0] >= m[1][1] && m[0][0] >= m[2][2] {
        let s = 2.0 * (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt();
        Quaternion::new(
            (m[2][1] - m[1][2]) / s,
            0.25 * s,
            (m[0][1] + m[1][0]) / s,
            (m[0][2] + m[2][0]) / s,
        )
    } else if m[1][1] >= m[2][2] {
        let s = 2.0 * (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt();
        Quaternion::new(
            (m[0][2] - m[2][0]) / s,
            (m[0][1] + m[1][0]) / s,
            0.25 * s,
            (m[1][2] + m[2][1]) / s,
        )
    } else {
        let s = 2.0 * (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt();
        Quaternion::new(
            (m[1][0] - m[0][1]) / s,
            (m[0][2] + m[2][0]) / s,
            (m[1][2] + m[2][1]) / s,
            0.25 * s,
        )
    };
    let q = q.normalize();
    if q.q0 < 0.0 {
        q.scale(-1.0)
    } else {
        q
    }
}

/// Roll, pitch and yaw in radians for the ZYX (yaw-pitch-roll) sequence,
/// `R = Rz(yaw) Ry(pitch) Rx(roll)`.
///
/// At gimbal lock roll is fixed to zero and the whole remaining rotation is
/// reported as yaw. Lock is detected on `sin(pitch)`, because near ±90° an
/// `f64` pitch cannot resolve offsets much below 1e-8 rad.
pub fn quat_to_euler(q: Quaternion) -> (f64, f64, f64) {
    let (w, x, y, z) = (q.q0, q.qv.x, q.qv.y, q.qv.z);
    let sinp = (2.0 * (w * y - z * x)).clamp(-1.0, 1.0);
    let pitch = sinp.asin();
    if 1.0 - sinp.abs() < GIMBAL_LOCK_TOL {
        let r01 = 2.0 * (x * y - w * z);
        let r11 = 1.0 - 2.0 * (x * x + z * z);
        return (0.0, pitch, (-r01).atan2(r11));
    }
    let roll = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
    let yaw = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
    (roll, pitch, yaw)
}

/// Inverse of [`quat_to_euler`].
pub fn euler_to_quat(roll: f64, pitch: f64, yaw: f64) -> Quaternion {
    let (sr, cr) = (0.5 * roll).sin_cos();
    let (sp, cp) = (0.5 * pitch).sin_cos();
    let (sy, cy) = (0.5 * yaw).sin_cos();
    Quaternion::new(
        cr * cp * cy + sr * sp * sy,
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
    )
}

/// Angle in `[0, π]` of the rotation taking `a` to `b`.
pub fn rotation_angle(a: Quaternion, b: Quaternion) -> f64 {
    let d = a.conj() * b;
    2.0 * d.qv.norm().atan2(d.q0.abs())
}
