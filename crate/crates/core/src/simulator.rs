//! Ground-truth trajectory and measurement synthesis.
//!
//! The trajectory is a repeated cycle: a stationary period, then one full
//! revolution about each body axis (x, y, z) at constant rate. Measurements
//! follow the usual models
//!
//! ```text
//! y_ω = ω + e_ω,   y_a = −R(q^bn) g^n + e_a,   y_m = R(q^bn) m^n + e_m
//! ```
//!
//! with isotropic Gaussian noise added to the unit-norm gravity and field
//! directions. Noisy vectors are not renormalized.
//!
//! Randomness comes from ChaCha8 seeded with `SimConfig::seed`; stream 0
//! drives sensor noise and stream 1 drives outlier injection, so changing the
//! outlier probability never perturbs the noise sequence.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{gravity_ref, mag_ref};
use crate::filter::ImuSample;
use crate::linalg::Vec3;
use crate::rotmath::{quat_exp, Quaternion};

const NOISE_STREAM: u64 = 0;
const OUTLIER_STREAM: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Sampling rate in Hz.
    pub fs: f64,
    pub n_stationary: usize,
    pub n_per_rotation: usize,
    pub n_cycles: usize,
    /// Dip angle in radians.
    pub dip: f64,
    pub sigma_omega: f64,
    pub sigma_acc: f64,
    pub sigma_mag: f64,
    pub outlier_prob: f64,
    pub seed: u64,
    /// Rotation vector (rad) applied to the true initial orientation to form
    /// the filters' initial estimate.
    pub init_error: Vec3,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            fs: 10.0,
            n_stationary: 200,
            n_per_rotation: 200,
            n_cycles: 10,
            dip: 0.0,
            sigma_omega: 5.0 * std::f64::consts::PI / 180.0,
            sigma_acc: 0.01,
            sigma_mag: 0.01,
            outlier_prob: 0.0,
            seed: 0,
            init_error: Vec3::new(0.0, 0.0, 0.0),
        }
    }
}

impl SimConfig {
    pub fn sample_time(&self) -> f64 {
        1.0 / self.fs
    }

    pub fn len(&self) -> usize {
        self.n_cycles * (self.n_stationary + 3 * self.n_per_rotation)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rotation rate during the revolution segments.
    pub fn rotation_rate(&self) -> f64 {
        TAU / (self.n_per_rotation as f64 * self.sample_time())
    }

    /// Noise-free copy.
    pub fn noiseless(mut self) -> Self {
        self.sigma_omega = 0.0;
        self.sigma_acc = 0.0;
        self.sigma_mag = 0.0;
        self.outlier_prob = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return bad("fs must be positive");
        }
        if self.n_stationary == 0 || self.n_per_rotation == 0 || self.n_cycles == 0 {
            return bad("sample counts must be positive");
        }
        if !(0.0..=1.0).contains(&self.outlier_prob) {
            return bad("outlier probability must lie in [0, 1]");
        }
        for (name, s) in [
            ("sigma_omega", self.sigma_omega),
            ("sigma_acc", self.sigma_acc),
            ("sigma_mag", self.sigma_mag),
        ] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be non-negative")));
            }
        }
        if !self.dip.is_finite() || !self.init_error.is_finite() {
            return bad("dip and init_error must be finite");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthSample {
    pub t: f64,
    pub q: Quaternion,
    pub omega: Vec3,
}

/// True orientation `q^nb` and angular velocity at every sample.
///
/// `omega[k]` is the rate over the interval ending at sample `k`, so
/// `q[k] = q[k-1] ⊙ exp_q(T/2 · omega[k])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub sample_time: f64,
    pub samples: Vec<TruthSample>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn orientations(&self) -> impl Iterator<Item = Quaternion> + '_ {
        self.samples.iter().map(|s| s.q)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementLog {
    pub samples: Vec<ImuSample>,
    /// `[accelerometer, magnetometer]` replacement flags per sample.
    pub outlier_mask: Vec<[bool; 2]>,
}

impl MeasurementLog {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn outlier_counts(&self) -> [usize; 2] {
        self.outlier_mask
            .iter()
            .fold([0, 0], |[a, m], f| [a + f[0] as usize, m + f[1] as usize])
    }
}

pub fn generate_trajectory(cfg: &SimConfig) -> Result<GroundTruth> {
    cfg.validate()?;
    let dt = cfg.sample_time();
    let rate = cfg.rotation_rate();
    let axes = [
        Vec3::new(rate, 0.0, 0.0),
        Vec3::new(0.0, rate, 0.0),
        Vec3::new(0.0, 0.0, rate),
    ];

    let mut omegas = Vec::with_capacity(cfg.len());
    for _ in 0..cfg.n_cycles {
        omegas.extend(std::iter::repeat_n(Vec3::zero(), cfg.n_stationary));
        for w in axes {
            omegas.extend(std::iter::repeat_n(w, cfg.n_per_rotation));
        }
    }

    let mut q = Quaternion::identity();
    let samples = omegas
        .into_iter()
        .enumerate()
        .map(|(k, omega)| {
            if k > 0 {
                q = q * quat_exp(omega.scale(0.5 * dt));
            }
            TruthSample {
                t: k as f64 * dt,
                q,
                omega,
            }
        })
        .collect();
    Ok(GroundTruth {
        sample_time: dt,
        samples,
    })
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> Vec3 {
    let mut draw = || rng.sample::<f64, _>(StandardNormal) * sigma;
    Vec3::new(draw(), draw(), draw())
}

pub fn synthesize_measurements(truth: &GroundTruth, cfg: &SimConfig) -> MeasurementLog {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(NOISE_STREAM);
    let g_n = gravity_ref::<f64>();
    let m_n = mag_ref(cfg.dip);
    let samples = truth
        .samples
        .iter()
        .map(|s| {
            let gyro = s.omega + gaussian(&mut rng, cfg.sigma_omega);
            let acc = -s.q.rotate_inverse(g_n) + gaussian(&mut rng, cfg.sigma_acc);
            let mag = s.q.rotate_inverse(m_n) + gaussian(&mut rng, cfg.sigma_mag);
            ImuSample {
                t: s.t,
                gyro,
                acc,
                mag,
            }
        })
        .collect::<Vec<_>>();
    MeasurementLog {
        outlier_mask: vec![[false; 2]; samples.len()],
        samples,
    }
}

/// Independently for each sample and each of accelerometer and magnetometer,
/// replaces the vector with a draw from `N(0, I₃)` with probability
/// `cfg.outlier_prob`.
pub fn inject_outliers(mut log: MeasurementLog, cfg: &SimConfig) -> MeasurementLog {
    if cfg.outlier_prob <= 0.0 {
        return log;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(OUTLIER_STREAM);
    for (s, mask) in log.samples.iter_mut().zip(log.outlier_mask.iter_mut()) {
        // Always draw the replacement so the stream position does not depend
        // on earlier decisions.
        for (sensor, slot) in [&mut s.acc, &mut s.mag].into_iter().enumerate() {
            let hit = rng.random::<f64>() < cfg.outlier_prob;
            let replacement = gaussian(&mut rng, 1.0);
            if hit {
                *slot = replacement;
                mask[sensor] = true;
            }
        }
    }
    log
}

/// Trajectory plus measurements (with outliers if configured).
pub fn simulate(cfg: &SimConfig) -> Result<(GroundTruth, MeasurementLog)> {
    let truth = generate_trajectory(cfg)?;
    let log = synthesize_measurements(&truth, cfg);
    let log = inject_outliers(log, cfg);
    Ok((truth, log))
}
