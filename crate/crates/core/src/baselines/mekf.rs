//! Multiplicative extended Kalman filter.
//!
//! The state is a 3-dimensional rotation-vector deviation `η` about the
//! quaternion linearisation point `q̂`. After every measurement update the
//! deviation is folded into `q̂` via `q̂ ← q̂ ⊙ exp_q(η̂/2)` and reset to zero,
//! so only `q̂` and the 3×3 covariance `P` of `η` are carried.

use crate::error::{Error, Result};
use crate::estimator::{body_references, mag_ref};
use crate::linalg::{Mat3, Matrix, Vec3};
use crate::rotmath::{exp_r, quat_exp, Quaternion};
use crate::scalar::Scalar;

/// Innovation covariances with a 1-norm condition number above this are
/// rejected.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

/// Initial `P` for scenarios with a known initial orientation.
pub const KNOWN_INIT_VARIANCE: f64 = 1e-6;

/// Initial `P` diagonal for a large, unknown initial error: a 90° standard
/// deviation spread over three axes.
pub fn large_init_variance() -> f64 {
    std::f64::consts::FRAC_PI_2.powi(2) / 3.0
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MekfConfig<S = f64> {
    pub sample_time: S,
    /// Process noise added to `P` every prediction (rad²).
    pub q_gyro: Mat3<S>,
    pub r_acc: Mat3<S>,
    pub r_mag: Mat3<S>,
    pub dip: f64,
    mag_ref: Vec3<S>,
}

impl MekfConfig {
    pub fn new(sample_time: f64, q_gyro: Mat3, r_acc: Mat3, r_mag: Mat3, dip: f64) -> Result<Self> {
        if !(sample_time.is_finite() && sample_time > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sampling time must be positive, got {sample_time}"
            )));
        }
        for (name, m) in [
            ("process", &q_gyro),
            ("accelerometer", &r_acc),
            ("magnetometer", &r_mag),
        ] {
            if !m.is_finite() || (*m - m.transpose()).norm_fro() > 1e-12 {
                return Err(Error::InvalidConfig(format!(
                    "{name} noise covariance must be finite and symmetric"
                )));
            }
            if (0..3).any(|i| m.0[i][i] < 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} noise covariance has a negative variance"
                )));
            }
        }
        if !dip.is_finite() {
            return Err(Error::InvalidConfig("dip angle must be finite".into()));
        }
        Ok(Self {
            sample_time,
            q_gyro,
            r_acc,
            r_mag,
            dip,
            mag_ref: mag_ref(dip),
        })
    }

    /// Isotropic noise matched to white gyroscope, accelerometer and
    /// magnetometer noise with the given standard deviations.
    pub fn from_sigmas(
        sample_time: f64,
        sigma_gyro: f64,
        sigma_acc: f64,
        sigma_mag: f64,
        dip: f64,
    ) -> Result<Self> {
        let iso = |v: f64| Mat3::from_diagonal([v; 3]);
        Self::new(
            sample_time,
            iso((sample_time * sigma_gyro).powi(2)),
            iso(sigma_acc * sigma_acc),
            iso(sigma_mag * sigma_mag),
            dip,
        )
    }
}

impl<S: Scalar> MekfConfig<S> {
    pub fn cast<U: Scalar>(&self) -> MekfConfig<U> {
        MekfConfig {
            sample_time: U::from_f64(self.sample_time.to_f64()),
            q_gyro: Matrix::from_f64(&self.q_gyro.map_f64()),
            r_acc: Matrix::from_f64(&self.r_acc.map_f64()),
            r_mag: Matrix::from_f64(&self.r_mag.map_f64()),
            dip: self.dip,
            mag_ref: Vec3::from_f64(self.mag_ref.to_f64()),
        }
    }

    pub fn mag_ref(&self) -> Vec3<S> {
        self.mag_ref
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MekfState<S = f64> {
    pub q_hat: Quaternion<S>,
    pub p: Mat3<S>,
}

impl<S: Scalar> MekfState<S> {
    pub fn new(q_hat: Quaternion<S>, p: Mat3<S>) -> Self {
        Self { q_hat, p }
    }

    pub fn with_variance(q_hat: Quaternion<S>, variance: f64) -> Self {
        Self::new(q_hat, Mat3::from_diagonal([S::from_f64(variance); 3]))
    }
}

/// Time update: `q̂ ← q̂ ⊙ exp_q(T/2 y_ω)`, `P ← F P Fᵀ + Q` with
/// `F = exp_R(−T y_ω)`.
pub fn mekf_predict<S: Scalar>(
    state: &MekfState<S>,
    y_omega: Vec3<S>,
    cfg: &MekfConfig<S>,
) -> MekfState<S> {
    let dtheta = y_omega.scale(cfg.sample_time);
    let q = (state.q_hat * quat_exp(dtheta.scale(S::from_f64(0.5)))).normalize();
    let f = exp_r(-dtheta);
    let p = f * state.p * f.transpose() + cfg.q_gyro;
    MekfState::new(q, p)
}

/// `[−[g_b ×]; [m_b ×]]`, the Jacobian of the stacked residual with respect
/// to the orientation deviation.
fn stacked_jacobian<S: Scalar>(g_b: Vec3<S>, m_b: Vec3<S>) -> Matrix<S, 6, 3> {
    let ha = g_b.skew();
    let hm = m_b.skew();
    Matrix::from_fn(|i, j| if i < 3 { -ha.0[i][j] } else { hm.0[i - 3][j] })
}

/// Measurement Jacobian `H` at `q_hat`.
pub fn measurement_jacobian<S: Scalar>(
    q_hat: Quaternion<S>,
    cfg: &MekfConfig<S>,
) -> Matrix<S, 6, 3> {
    let (g_b, m_b) = body_references(q_hat, cfg.mag_ref);
    stacked_jacobian(g_b, m_b)
}

/// Stacked accelerometer and magnetometer measurement update.
pub fn mekf_update<S: Scalar>(
    state: &MekfState<S>,
    y_a: Vec3<S>,
    y_m: Vec3<S>,
    cfg: &MekfConfig<S>,
) -> Result<MekfState<S>> {
    let (g_b, m_b) = body_references(state.q_hat, cfg.mag_ref);
    let ra = y_a + g_b;
    let rm = y_m - m_b;
    let residual: Matrix<S, 6, 1> = Matrix([[ra.x], [ra.y], [ra.z], [rm.x], [rm.y], [rm.z]]);

    let h = stacked_jacobian(g_b, m_b);
    let ht = h.transpose();

    let mut innovation = h * state.p * ht;
    for i in 0..3 {
        for j in 0..3 {
            innovation.0[i][j] = innovation.0[i][j] + cfg.r_acc.0[i][j];
            innovation.0[i + 3][j + 3] = innovation.0[i + 3][j + 3] + cfg.r_mag.0[i][j];
        }
    }
    let inv = innovation.inverse().ok_or(Error::SingularInnovation {
        condition: f64::INFINITY,
    })?;
    let condition = innovation.norm_1() * inv.norm_1();
    if condition.is_nan() || condition > MAX_INNOVATION_CONDITION {
        return Err(Error::SingularInnovation { condition });
    }

    let gain = state.p * ht * inv;
    let eta = gain * residual;
    let eta = Vec3::new(eta.0[0][0], eta.0[1][0], eta.0[2][0]);
    let q = (state.q_hat * quat_exp(eta.scale(S::from_f64(0.5)))).normalize();
    let p = ((Mat3::identity() - gain * h) * state.p).symmetrize();
    Ok(MekfState::new(q, p))
}

/// Measurement update with `y_a`, `y_m` taken at the current estimate,
/// followed by prediction over the next interval with `y_ω`.
pub fn mekf_step<S: Scalar>(
    state: &MekfState<S>,
    y_omega: Vec3<S>,
    y_a: Vec3<S>,
    y_m: Vec3<S>,
    cfg: &MekfConfig<S>,
) -> Result<MekfState<S>> {
    if !(y_omega.is_finite() && y_a.is_finite() && y_m.is_finite()) {
        return Err(Error::NonFiniteInput("measurement"));
    }
    let updated = mekf_update(state, y_a, y_m, cfg)?;
    Ok(mekf_predict(&updated, y_omega, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::gravity_ref;
    use crate::rotmath::rotation_angle;

    fn cfg() -> MekfConfig {
        MekfConfig::from_sigmas(0.1, 0.087, 0.01, 0.01, 0.0).unwrap()
    }

    #[test]
    fn zero_rate_prediction_adds_process_noise() {
        let c = cfg();
        let q = Quaternion::new(0.6, 0.2, -0.7, 0.3).normalize();
        let p = Matrix([[0.3, 0.01, 0.0], [0.01, 0.2, 0.02], [0.0, 0.02, 0.1]]);
        let s = mekf_predict(&MekfState::new(q, p), Vec3::zero(), &c);
        assert_eq!(s.q_hat, q);
        assert!((s.p - (p + c.q_gyro)).norm_fro() < 1e-16);
    }

    #[test]
    fn zero_covariance_stays_zero_without_process_noise() {
        let zero = Mat3::zeros();
        let c = MekfConfig::new(0.1, zero, Mat3::identity(), Mat3::identity(), 0.0).unwrap();
        let s = MekfState::new(Quaternion::identity(), zero);
        let s = mekf_predict(&s, Vec3::new(0.3, -0.2, 1.0), &c);
        assert_eq!(s.p.norm_fro(), 0.0);
    }

    #[test]
    fn covariance_accumulates_linearly_when_stationary() {
        let c = cfg();
        let mut s = MekfState::new(Quaternion::identity(), Mat3::zeros());
        for _ in 0..25 {
            s = mekf_predict(&s, Vec3::zero(), &c);
        }
        let expected = 25.0 * (0.1f64 * 0.087).powi(2);
        let want = Mat3::from_diagonal([expected; 3]);
        assert!((s.p - want).norm_fro() < 1e-15);
    }

    #[test]
    fn zero_residual_keeps_orientation() {
        let c = cfg();
        let q = Quaternion::new(0.9, 0.1, 0.2, -0.3).normalize();
        let y_a = -q.rotate_inverse(gravity_ref());
        let y_m = q.rotate_inverse(c.mag_ref());
        let s0 = MekfState::with_variance(q, 0.01);
        let s = mekf_update(&s0, y_a, y_m, &c).unwrap();
        assert!(rotation_angle(s.q_hat, q) < 1e-14);
        assert!(s.p.trace() < s0.p.trace());
    }

    #[test]
    fn singular_innovation_is_reported() {
        let zero = Mat3::zeros();
        let c = MekfConfig::new(0.1, zero, zero, zero, 0.0).unwrap();
        let s = MekfState::new(Quaternion::identity(), zero);
        assert!(matches!(
            mekf_update(&s, Vec3::new(0.0, 0.0, -1.0), Vec3::new(1.0, 0.0, 0.0), &c),
            Err(Error::SingularInnovation { .. })
        ));
    }

    #[test]
    fn update_pulls_towards_measurement() {
        let c = cfg();
        let truth = Quaternion::new(0.8, 0.3, -0.2, 0.4).normalize();
        let y_a = -truth.rotate_inverse(gravity_ref());
        let y_m = truth.rotate_inverse(c.mag_ref());
        let off = truth * quat_exp(Vec3::new(0.05, -0.03, 0.04));
        let s = MekfState::with_variance(off, 0.01);
        let s = mekf_update(&s, y_a, y_m, &c).unwrap();
        assert!(rotation_angle(s.q_hat, truth) < 0.1 * rotation_angle(off, truth));
    }

    #[test]
    fn rejects_asymmetric_noise() {
        let bad = Matrix([[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(MekfConfig::new(0.1, bad, Mat3::identity(), Mat3::identity(), 0.0).is_err());
    }
}
