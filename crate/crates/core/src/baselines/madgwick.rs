//! Quaternion gradient-descent filter in the style of Madgwick's MARG
//! algorithm, using a fixed magnetic reference `(cos δ, 0, −sin δ)` instead of
//! online field estimation so that all filters share one measurement model.
//!
//! The objective is `½|f(q)|²` with
//! `f(q) = [y_a + R(q)ᵀ g^n ; y_m − R(q)ᵀ m^n]`, where the rotation matrix
//! entries are written in their unit-norm-simplified forms (`1 − 2(x² + y²)`
//! and so on). Its gradient `J(q)ᵀ f(q)` lives in the 4-dimensional quaternion
//! space, which is what distinguishes this filter from the rotation-vector
//! estimator.

use crate::error::{Error, Result};
use crate::estimator::mag_ref;
use crate::linalg::Vec3;
use crate::rotmath::Quaternion;
use crate::scalar::Scalar;

use super::super::estimator::DEFAULT_GRAD_EPS;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MadgwickConfig<S = f64> {
    pub sample_time: S,
    /// Quaternion-rate gain `β_m`.
    pub gain: S,
    pub dip: f64,
    pub grad_eps: S,
    mag_ref: Vec3<S>,
    // 2·b_x, 2·b_z, 4·b_x, 4·b_z for the reference field (b_x, 0, b_z).
    bx2: S,
    bz2: S,
    bx4: S,
    bz4: S,
}

impl MadgwickConfig {
    pub fn new(sample_time: f64, gain: f64, dip: f64) -> Result<Self> {
        if !(sample_time.is_finite() && sample_time > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sampling time must be positive, got {sample_time}"
            )));
        }
        if !(gain.is_finite() && gain >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gain must be non-negative, got {gain}"
            )));
        }
        if !dip.is_finite() {
            return Err(Error::InvalidConfig("dip angle must be finite".into()));
        }
        let m = mag_ref(dip);
        Ok(Self {
            sample_time,
            gain,
            dip,
            grad_eps: DEFAULT_GRAD_EPS,
            mag_ref: m,
            bx2: 2.0 * m.x,
            bz2: 2.0 * m.z,
            bx4: 4.0 * m.x,
            bz4: 4.0 * m.z,
        })
    }
}

impl<S: Scalar> MadgwickConfig<S> {
    pub fn cast<U: Scalar>(&self) -> MadgwickConfig<U> {
        let c = |v: S| U::from_f64(v.to_f64());
        MadgwickConfig {
            sample_time: c(self.sample_time),
            gain: c(self.gain),
            dip: self.dip,
            grad_eps: c(self.grad_eps),
            mag_ref: Vec3::from_f64(self.mag_ref.to_f64()),
            bx2: c(self.bx2),
            bz2: c(self.bz2),
            bx4: c(self.bx4),
            bz4: c(self.bz4),
        }
    }

    pub fn mag_ref(&self) -> Vec3<S> {
        self.mag_ref
    }
}

/// `√(3/4) σ_ω`, the quaternion-rate counterpart of `√3 σ_ω`.
pub fn madgwick_gain_from_gyro_sigma(sigma_omega: f64) -> f64 {
    0.75f64.sqrt() * sigma_omega
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MadgwickState<S = f64> {
    pub q_hat: Quaternion<S>,
}

impl<S: Scalar> MadgwickState<S> {
    pub fn new(q_hat: Quaternion<S>) -> Self {
        Self { q_hat }
    }
}

/// Stacked residual `f(q)` (accelerometer rows first).
pub fn objective<S: Scalar>(
    q: Quaternion<S>,
    y_a: Vec3<S>,
    y_m: Vec3<S>,
    cfg: &MadgwickConfig<S>,
) -> [S; 6] {
    let one = S::one();
    let two = S::from_f64(2.0);
    let (w, x, y, z) = (q.q0, q.qv.x, q.qv.y, q.qv.z);
    let g_b = Vec3::new(
        two * (x * z - w * y),
        two * (y * z + w * x),
        one - two * (x * x + y * y),
    );
    let row1 = Vec3::new(
        one - two * (y * y + z * z),
        two * (x * y - w * z),
        two * (x * z + w * y),
    );
    let m_b = row1.scale(cfg.mag_ref.x) + g_b.scale(cfg.mag_ref.z);
    let fa = y_a + g_b;
    let fm = y_m - m_b;
    [fa.x, fa.y, fa.z, fm.x, fm.y, fm.z]
}

/// `J(q)ᵀ f(q)`, the gradient of `½|f(q)|²` in quaternion coordinates.
pub fn gradient_f<S: Scalar>(
    q: Quaternion<S>,
    y_a: Vec3<S>,
    y_m: Vec3<S>,
    cfg: &MadgwickConfig<S>,
) -> Quaternion<S> {
    let one = S::one();
    let two = S::from_f64(2.0);
    let (w, x, y, z) = (q.q0, q.qv.x, q.qv.y, q.qv.z);
    let (bx, bz) = (cfg.mag_ref.x, cfg.mag_ref.z);
    let (bx2, bz2, bx4, bz4) = (cfg.bx2, cfg.bz2, cfg.bx4, cfg.bz4);

    let w2 = two * w;
    let x2 = two * x;
    let y2 = two * y;
    let z2 = two * z;
    let xz = x * z;
    let wy = w * y;
    let yz = y * z;
    let wx = w * x;
    let xy = x * y;
    let wz = w * z;
    let xx = x * x;
    let yy = y * y;
    let zz = z * z;

    // Predicted gravity and field in the body frame.
    let g0 = two * (xz - wy);
    let g1 = two * (yz + wx);
    let g2 = one - two * (xx + yy);
    let m0 = bx * (one - two * (yy + zz)) + bz * g0;
    let m1 = bx * (two * (xy - wz)) + bz * g1;
    let m2 = bx * (two * (xz + wy)) + bz * g2;

    // Accelerometer residual f_a, and e = m_b − y_m = −f_m so that the field
    // Jacobian can be used without flipping its sign.
    let fa0 = y_a.x + g0;
    let fa1 = y_a.y + g1;
    let fa2 = y_a.z + g2;
    let e0 = m0 - y_m.x;
    let e1 = m1 - y_m.y;
    let e2 = m2 - y_m.z;

    // Shared Jacobian entries of R(q)ᵀ m^n.
    let j10 = bz2 * x - bx2 * z;
    let j11 = bx2 * y + bz2 * w;
    let j12 = bx2 * x + bz2 * z;
    let j13 = bz2 * y - bx2 * w;

    let gw = x2 * fa1 - y2 * fa0 + j10 * e1 + bx2 * y * e2 - bz2 * y * e0;
    let gx =
        z2 * fa0 + w2 * fa1 - two * x2 * fa2 + bz2 * z * e0 + j11 * e1 + (bx2 * z - bz4 * x) * e2;
    let gy = z2 * fa1 - w2 * fa0 - two * y2 * fa2 - (bx4 * y + bz2 * w) * e0
        + j12 * e1
        + (bx2 * w - bz4 * y) * e2;
    let gz = x2 * fa0 + y2 * fa1 + (bz2 * x - bx4 * z) * e0 + j13 * e1 + bx2 * x * e2;

    Quaternion::new(gw, gx, gy, gz)
}

/// One filter iteration:
/// `q̂ ← normalize(q̂ + T (½ S(q̂) y_ω − β_m ∇f / |∇f|))`.
pub fn madgwick_step<S: Scalar>(
    state: &MadgwickState<S>,
    y_omega: Vec3<S>,
    y_a: Vec3<S>,
    y_m: Vec3<S>,
    cfg: &MadgwickConfig<S>,
) -> Result<MadgwickState<S>> {
    if !(y_omega.is_finite() && y_a.is_finite() && y_m.is_finite()) {
        return Err(Error::NonFiniteInput("measurement"));
    }
    let q = state.q_hat;
    let half = S::from_f64(0.5);
    let q_dot_gyro = q.s_mul(y_omega).scale(half);
    let grad = gradient_f(q, y_a, y_m, cfg);
    let grad_norm = grad.norm();
    let q_dot = if grad_norm > cfg.grad_eps {
        let k = cfg.gain / grad_norm;
        q_dot_gyro + grad.scale(-k)
    } else {
        q_dot_gyro
    };
    let q_new = (q + q_dot.scale(cfg.sample_time)).normalize();
    Ok(MadgwickState::new(q_new))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::gravity_ref;
    use crate::rotmath::rotation_angle;

    fn perfect(q: Quaternion, c: &MadgwickConfig) -> (Vec3, Vec3) {
        (
            -q.rotate_inverse(gravity_ref()),
            q.rotate_inverse(c.mag_ref()),
        )
    }

    #[test]
    fn gain_rule() {
        let s = 5.0 * std::f64::consts::PI / 180.0;
        assert!((madgwick_gain_from_gyro_sigma(s) - 0.5 * 3f64.sqrt() * s).abs() < 1e-15);
    }

    #[test]
    fn objective_vanishes_for_perfect_measurements() {
        let c = MadgwickConfig::new(0.1, 0.07, 0.3).unwrap();
        let q = Quaternion::new(0.2, 0.4, -0.6, 0.3).normalize();
        let (y_a, y_m) = perfect(q, &c);
        for v in objective(q, y_a, y_m, &c) {
            assert!(v.abs() < 1e-15);
        }
        let g = gradient_f(q, y_a, y_m, &c);
        assert!(g.norm() < 1e-14);
    }

    #[test]
    fn stationary_fixed_point() {
        let c = MadgwickConfig::new(0.1, 0.07, 0.0).unwrap();
        let q = Quaternion::new(0.7, -0.1, 0.2, 0.5).normalize();
        let (y_a, y_m) = perfect(q, &c);
        let s = madgwick_step(&MadgwickState::new(q), Vec3::zero(), y_a, y_m, &c).unwrap();
        assert!(rotation_angle(q, s.q_hat) < 1e-12);
    }

    #[test]
    fn correction_step_is_bounded() {
        let c = MadgwickConfig::new(0.1, 0.13, 0.5).unwrap();
        let q = Quaternion::new(0.6, 0.2, -0.7, 0.3).normalize();
        for f in [1.0, 10.0, 1e4] {
            let y_a = Vec3::new(3.0 * f, -f, 7.0);
            let y_m = Vec3::new(-f, 2.0, 0.5 * f);
            let s = madgwick_step(&MadgwickState::new(q), Vec3::zero(), y_a, y_m, &c).unwrap();
            let moved = (q + s.q_hat.scale(-1.0)).norm();
            assert!(moved <= 2.0 * c.gain * c.sample_time);
            assert!((s.q_hat.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let c = MadgwickConfig::new(0.1, 0.07, 0.0).unwrap();
        let st = MadgwickState::new(Quaternion::identity());
        let nan = Vec3::new(0.0, f64::NAN, 0.0);
        assert!(madgwick_step(&st, Vec3::zero(), nan, Vec3::zero(), &c).is_err());
    }
}
