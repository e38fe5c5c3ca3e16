//! Gyroscope integration corrected by one normalized gradient-descent step.
//!
//! Each step linearises the accelerometer/magnetometer cost around the
//! previous estimate, takes the gradient with respect to a rotation-vector
//! deviation `η`, and folds a fixed-length step along the negative normalized
//! gradient into the angular velocity:
//!
//! ```text
//! ω̂ = y_ω − β ∇V / |∇V|
//! q̂ ← normalize(q̂ + T/2 · S(q̂) ω̂)
//! ```
//!
//! The correction rotates the estimate by at most `β T` per sample no matter
//! how large the residual is, which is what makes the filter insensitive to
//! accelerometer and magnetometer outliers.

use crate::error::{Error, Result};
use crate::linalg::{Mat3, Matrix, Vec3};
use crate::rotmath::{rotmat_to_quat, Quaternion};
use crate::scalar::Scalar;

/// Default threshold on `|∇V|` below which no correction is applied.
pub const DEFAULT_GRAD_EPS: f64 = 1e-12;

/// Gravity direction in the navigation frame.
pub fn gravity_ref<S: Scalar>() -> Vec3<S> {
    Vec3::new(S::zero(), S::zero(), S::one())
}

/// Magnetic field direction `(cos δ, 0, −sin δ)` for dip angle `δ`.
pub fn mag_ref(dip: f64) -> Vec3 {
    Vec3::new(dip.cos(), 0.0, -dip.sin())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterConfig<S = f64> {
    /// Sampling time `T` in seconds.
    pub sample_time: S,
    /// Gain `β` in rad/s.
    pub beta: S,
    /// Dip angle `δ` in radians.
    pub dip: f64,
    pub grad_eps: S,
    half_t: S,
    half_t_beta: S,
    mag_ref: Vec3<S>,
}

impl FilterConfig {
    pub fn new(sample_time: f64, beta: f64, dip: f64) -> Result<Self> {
        if !(sample_time.is_finite() && sample_time > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sampling time must be positive, got {sample_time}"
            )));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "beta must be non-negative, got {beta}"
            )));
        }
        if !dip.is_finite() {
            return Err(Error::InvalidConfig("dip angle must be finite".into()));
        }
        Ok(Self {
            sample_time,
            beta,
            dip,
            grad_eps: DEFAULT_GRAD_EPS,
            half_t: 0.5 * sample_time,
            half_t_beta: 0.5 * sample_time * beta,
            mag_ref: mag_ref(dip),
        })
    }

    pub fn with_grad_eps(mut self, eps: f64) -> Self {
        self.grad_eps = eps;
        self
    }
}

impl<S: Scalar> FilterConfig<S> {
    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(&self) -> FilterConfig<U> {
        FilterConfig {
            sample_time: U::from_f64(self.sample_time.to_f64()),
            beta: U::from_f64(self.beta.to_f64()),
            dip: self.dip,
            grad_eps: U::from_f64(self.grad_eps.to_f64()),
            half_t: U::from_f64(self.half_t.to_f64()),
            half_t_beta: U::from_f64(self.half_t_beta.to_f64()),
            mag_ref: Vec3::from_f64(self.mag_ref.to_f64()),
        }
    }

    pub fn mag_ref(&self) -> Vec3<S> {
        self.mag_ref
    }
}

/// `√3 σ_ω`: the standard deviation of one step of gyroscope integration
/// drift, divided by `T`.
pub fn beta_from_gyro_sigma(sigma_omega: f64) -> f64 {
    3f64.sqrt() * sigma_omega
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterState<S = f64> {
    pub q_hat: Quaternion<S>,
}

impl<S: Scalar> FilterState<S> {
    pub fn new(q_hat: Quaternion<S>) -> Self {
        Self { q_hat }
    }
}

/// Gravity and magnetic field directions in the body frame predicted by
/// `q^nb`, i.e. `R(q^bn) g^n` and `R(q^bn) m^n`. Assumes unit `q`.
#[inline]
pub(crate) fn body_references<S: Scalar>(q: Quaternion<S>, m_n: Vec3<S>) -> (Vec3<S>, Vec3<S>) {
    let one = S::one();
    let two = S::from_f64(2.0);
    let (w, x, y, z) = (q.q0, q.qv.x, q.qv.y, q.qv.z);
    let xz = x * z;
    let wy = w * y;
    let xx = x * x;
    let yy = y * y;
    // Rows of R(q^nb) are the navigation axes expressed in the body frame.
    let row3 = Vec3::new(
        two * (xz - wy),
        two * (y * z + w * x),
        one - two * (xx + yy),
    );
    let row1 = Vec3::new(
        one - two * (yy + z * z),
        two * (x * y - w * z),
        two * (xz + wy),
    );
    // m^n has no y component.
    let m_b = row1.scale(m_n.x) + row3.scale(m_n.z);
    (row3, m_b)
}

/// `∇V` at `η = 0` for the cost
/// `V(η) = ½|y_a + exp_R(η)ᵀ R(q̂^bn) g^n|² + ½|y_m − exp_R(η)ᵀ R(q̂^bn) m^n|²`.
pub fn gradient_v<S: Scalar>(
    q_hat: Quaternion<S>,
    y_a: Vec3<S>,
    y_m: Vec3<S>,
    cfg: &FilterConfig<S>,
) -> Vec3<S> {
    let (g_b, m_b) = body_references(q_hat, cfg.mag_ref);
    // −[g_b ×](y_a + g_b) + [m_b ×](y_m − m_b); the g_b × g_b and m_b × m_b
    // terms vanish.
    y_a.cross(g_b) + m_b.cross(y_m)
}

/// One filter iteration.
pub fn step<S: Scalar>(
    state: &FilterState<S>,
    y_omega: Vec3<S>,
    y_a: Vec3<S>,
    y_m: Vec3<S>,
    cfg: &FilterConfig<S>,
) -> Result<FilterState<S>> {
    if !(y_omega.is_finite() && y_a.is_finite() && y_m.is_finite()) {
        return Err(Error::NonFiniteInput("measurement"));
    }
    let q = state.q_hat;
    let grad = gradient_v(q, y_a, y_m, cfg);
    let grad_norm = grad.norm();
    // (T/2) ω̂, with T/2 applied before S(q).
    let half_step = y_omega.scale(cfg.half_t);
    let delta = if grad_norm > cfg.grad_eps {
        half_step - grad.scale(cfg.half_t_beta / grad_norm)
    } else {
        half_step
    };
    let q_new = (q + q.s_mul(delta)).normalize();
    Ok(FilterState::new(q_new))
}

/// Orientation from a single accelerometer/magnetometer pair (TRIAD).
///
/// The navigation z axis in body coordinates is `−y_a`, and the navigation x
/// axis is the part of `y_m` orthogonal to it.
pub fn init_from_accmag(y_a: Vec3, y_m: Vec3) -> Result<Quaternion> {
    if !(y_a.is_finite() && y_m.is_finite()) {
        return Err(Error::NonFiniteInput("initialization measurement"));
    }
    let na = y_a.norm();
    let nm = y_m.norm();
    if na <= 0.5 || nm <= 0.5 {
        return Err(Error::DegenerateGeometry(
            "accelerometer and magnetometer vectors must have norm above 0.5",
        ));
    }
    let z_b = -y_a.scale(1.0 / na);
    let m_b = y_m.scale(1.0 / nm);
    let sin_between = z_b.cross(m_b).norm();
    if sin_between < 1f64.to_radians().sin() {
        return Err(Error::DegenerateGeometry(
            "accelerometer and magnetometer vectors are parallel",
        ));
    }
    let horizontal = m_b - z_b.scale(m_b.dot(z_b));
    let x_b = horizontal.scale(1.0 / horizontal.norm());
    let y_b = z_b.cross(x_b);
    let r: Mat3 = Matrix([x_b.to_array(), y_b.to_array(), z_b.to_array()]);
    Ok(rotmat_to_quat(&r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotmath::{quat_exp, rotation_angle};

    fn cfg(beta: f64) -> FilterConfig {
        FilterConfig::new(0.1, beta, 0.0).unwrap()
    }

    fn perfect(q: Quaternion, c: &FilterConfig) -> (Vec3, Vec3) {
        let g_b = q.rotate_inverse(gravity_ref());
        let m_b = q.rotate_inverse(c.mag_ref());
        (-g_b, m_b)
    }

    #[test]
    fn beta_rule() {
        assert_eq!(beta_from_gyro_sigma(0.0), 0.0);
        assert!((beta_from_gyro_sigma(1.0) - 3f64.sqrt()).abs() < 1e-15);
        let b = beta_from_gyro_sigma(5.0 * std::f64::consts::PI / 180.0);
        assert!((b - 0.15115).abs() < 5e-6, "{b}");
    }

    #[test]
    fn gradient_vanishes_for_consistent_measurements() {
        let c = cfg(0.1);
        let g = gradient_v(
            Quaternion::identity(),
            Vec3::new(0.0, 0.0, -1.0),
            c.mag_ref(),
            &c,
        );
        assert_eq!(g, Vec3::zero());
        let g = gradient_v(Quaternion::identity(), Vec3::zero(), c.mag_ref(), &c);
        assert_eq!(g, Vec3::zero());
    }

    #[test]
    fn gradient_matches_residual_form() {
        let c = FilterConfig::new(0.01, 0.2, 0.9).unwrap();
        let q = Quaternion::new(0.3, -0.5, 0.1, 0.8).normalize();
        let y_a = Vec3::new(0.2, -0.3, -0.9);
        let y_m = Vec3::new(0.5, 0.4, 0.1);
        let g_b = q.rotate_inverse(gravity_ref());
        let m_b = q.rotate_inverse(c.mag_ref());
        let literal = -g_b.skew().mul_vec(y_a + g_b) + m_b.skew().mul_vec(y_m - m_b);
        assert!((gradient_v(q, y_a, y_m, &c) - literal).norm() < 1e-15);
    }

    #[test]
    fn fixed_point_with_perfect_stationary_measurements() {
        let c = FilterConfig::new(0.1, 0.15, 0.4).unwrap();
        let q = Quaternion::new(0.9, 0.1, -0.3, 0.2).normalize();
        let (y_a, y_m) = perfect(q, &c);
        let s = step(&FilterState::new(q), Vec3::zero(), y_a, y_m, &c).unwrap();
        assert!(rotation_angle(s.q_hat, q) < 1e-12);
    }

    #[test]
    fn pure_gyro_integration_matches_exact_rotation() {
        let c = cfg(0.0);
        let w = Vec3::new(0.31416, 0.0, 0.0);
        let (y_a, y_m) = perfect(Quaternion::identity(), &c);
        let s = step(&FilterState::new(Quaternion::identity()), w, y_a, y_m, &c).unwrap();
        let exact = quat_exp(w.scale(0.05));
        let angle = rotation_angle(Quaternion::identity(), s.q_hat);
        assert!((angle.to_degrees() - 1.8).abs() < 1e-3);
        assert!(rotation_angle(s.q_hat, exact) < 1e-5);
    }

    #[test]
    fn rejects_non_finite_measurements() {
        let c = cfg(0.1);
        let st = FilterState::new(Quaternion::identity());
        let bad = Vec3::new(f64::NAN, 0.0, 0.0);
        assert!(matches!(
            step(&st, bad, Vec3::zero(), Vec3::zero(), &c),
            Err(Error::NonFiniteInput(_))
        ));
        let inf = Vec3::new(0.0, f64::INFINITY, 0.0);
        assert!(step(&st, Vec3::zero(), Vec3::zero(), inf, &c).is_err());
    }

    #[test]
    fn correction_is_bounded_by_beta_t() {
        let c = cfg(0.2);
        let q = Quaternion::new(0.6, 0.2, -0.7, 0.3).normalize();
        let st = FilterState::new(q);
        for k in 0..50 {
            let f = 1.0 + 100.0 * k as f64;
            let y_a = Vec3::new(3.0 * f, -f, 7.0);
            let y_m = Vec3::new(-f, 2.0, 0.5 * f);
            let s = step(&st, Vec3::zero(), y_a, y_m, &c).unwrap();
            // Normalizing the first-order update shrinks the angle slightly.
            assert!(rotation_angle(q, s.q_hat) <= c.beta * c.sample_time + 1e-12);
        }
    }

    #[test]
    fn triad_identity() {
        let q = init_from_accmag(Vec3::new(0.0, 0.0, -1.0), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!(rotation_angle(q, Quaternion::identity()) < 1e-15);
    }

    #[test]
    fn triad_recovers_known_orientation() {
        for (dip, q) in [
            (0.0, Quaternion::new(0.3, -0.5, 0.1, 0.8)),
            (1.1, Quaternion::new(0.9, 0.1, 0.2, -0.3)),
            (-0.4, Quaternion::new(0.0, 0.0, 1.0, 0.2)),
        ] {
            let q = q.normalize();
            let c = FilterConfig::new(0.01, 0.0, dip).unwrap();
            let (y_a, y_m) = perfect(q, &c);
            // Scale freely: TRIAD only uses directions.
            let est = init_from_accmag(y_a.scale(9.81), y_m.scale(48.0)).unwrap();
            assert!(rotation_angle(est, q) < 1e-9, "dip {dip}");
        }
    }

    #[test]
    fn triad_rejects_parallel_vectors() {
        let v = Vec3::new(0.0, 0.0, -1.0);
        assert!(matches!(
            init_from_accmag(v, v),
            Err(Error::DegenerateGeometry(_))
        ));
        assert!(init_from_accmag(v, -v).is_err());
        assert!(init_from_accmag(Vec3::new(0.0, 0.0, -0.1), Vec3::new(1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(FilterConfig::new(0.0, 0.1, 0.0).is_err());
        assert!(FilterConfig::new(0.1, -1.0, 0.0).is_err());
        assert!(FilterConfig::new(0.1, 0.1, f64::NAN).is_err());
    }
}
