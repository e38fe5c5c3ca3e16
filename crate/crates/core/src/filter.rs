//! Uniform driver over the three filters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    madgwick_gain_from_gyro_sigma, madgwick_step, mekf_step, MadgwickConfig, MadgwickState,
    MekfConfig, MekfState,
};
use crate::error::{Error, Result};
use crate::estimator::{beta_from_gyro_sigma, step, FilterConfig, FilterState};
use crate::linalg::{Mat3, Vec3};
use crate::rotmath::Quaternion;

/// One time-stamped gyroscope/accelerometer/magnetometer triple.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub t: f64,
    pub gyro: Vec3,
    pub acc: Vec3,
    pub mag: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    /// Rotation-vector gradient-descent estimator.
    Fast,
    Madgwick,
    Mekf,
}

impl FilterKind {
    pub const ALL: [FilterKind; 3] = [FilterKind::Fast, FilterKind::Madgwick, FilterKind::Mekf];

    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Fast => "fast",
            FilterKind::Madgwick => "madgwick",
            FilterKind::Mekf => "mekf",
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(FilterKind::Fast),
            "madgwick" => Ok(FilterKind::Madgwick),
            "mekf" => Ok(FilterKind::Mekf),
            other => Err(Error::InvalidConfig(format!("unknown filter '{other}'"))),
        }
    }
}

/// Tuning for all three filters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    pub sample_time: f64,
    pub dip: f64,
    pub beta: f64,
    pub madgwick_gain: f64,
    /// Per-step process noise variance added to each diagonal entry of `P`.
    pub mekf_process_var: f64,
    pub mekf_acc_var: f64,
    pub mekf_mag_var: f64,
}

impl Tuning {
    /// Tuning matched to known white-noise standard deviations.
    pub fn matched(
        sample_time: f64,
        dip: f64,
        sigma_gyro: f64,
        sigma_acc: f64,
        sigma_mag: f64,
    ) -> Self {
        Self {
            sample_time,
            dip,
            beta: beta_from_gyro_sigma(sigma_gyro),
            madgwick_gain: madgwick_gain_from_gyro_sigma(sigma_gyro),
            mekf_process_var: (sample_time * sigma_gyro).powi(2),
            mekf_acc_var: sigma_acc * sigma_acc,
            mekf_mag_var: sigma_mag * sigma_mag,
        }
    }

    /// Hand-tuned values for real 100 Hz IMU logs.
    pub fn experimental(sample_time: f64, dip: f64) -> Self {
        Self {
            sample_time,
            dip,
            beta: 2.4e-3,
            madgwick_gain: 1.4e-3,
            mekf_process_var: 1.3e-3,
            mekf_acc_var: 2.63e-2,
            mekf_mag_var: 2.5e-2,
        }
    }

    pub fn fast_config(&self) -> Result<FilterConfig> {
        FilterConfig::new(self.sample_time, self.beta, self.dip)
    }

    pub fn madgwick_config(&self) -> Result<MadgwickConfig> {
        MadgwickConfig::new(self.sample_time, self.madgwick_gain, self.dip)
    }

    pub fn mekf_config(&self) -> Result<MekfConfig> {
        let iso = |v: f64| Mat3::from_diagonal([v; 3]);
        MekfConfig::new(
            self.sample_time,
            iso(self.mekf_process_var),
            iso(self.mekf_acc_var),
            iso(self.mekf_mag_var),
            self.dip,
        )
    }
}

/// A configured filter together with its current state.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Filter {
    Fast(FilterConfig, FilterState),
    Madgwick(MadgwickConfig, MadgwickState),
    Mekf(MekfConfig, MekfState),
}

impl Filter {
    /// Builds `kind` at orientation `q0`. `init_variance` only affects the MEKF.
    pub fn new(
        kind: FilterKind,
        tuning: &Tuning,
        q0: Quaternion,
        init_variance: f64,
    ) -> Result<Self> {
        Ok(match kind {
            FilterKind::Fast => Filter::Fast(tuning.fast_config()?, FilterState::new(q0)),
            FilterKind::Madgwick => {
                Filter::Madgwick(tuning.madgwick_config()?, MadgwickState::new(q0))
            }
            FilterKind::Mekf => Filter::Mekf(
                tuning.mekf_config()?,
                MekfState::with_variance(q0, init_variance),
            ),
        })
    }

    pub fn kind(&self) -> FilterKind {
        match self {
            Filter::Fast(..) => FilterKind::Fast,
            Filter::Madgwick(..) => FilterKind::Madgwick,
            Filter::Mekf(..) => FilterKind::Mekf,
        }
    }

    /// Advances the estimate by one sample period. `y_a` and `y_m` are
    /// measured at the time of the current estimate; `y_omega` is the rate
    /// over the following interval.
    pub fn step(&mut self, y_omega: Vec3, y_a: Vec3, y_m: Vec3) -> Result<()> {
        match self {
            Filter::Fast(cfg, st) => *st = step(st, y_omega, y_a, y_m, cfg)?,
            Filter::Madgwick(cfg, st) => *st = madgwick_step(st, y_omega, y_a, y_m, cfg)?,
            Filter::Mekf(cfg, st) => *st = mekf_step(st, y_omega, y_a, y_m, cfg)?,
        }
        Ok(())
    }

    pub fn orientation(&self) -> Quaternion {
        match self {
            Filter::Fast(_, st) => st.q_hat,
            Filter::Madgwick(_, st) => st.q_hat,
            Filter::Mekf(_, st) => st.q_hat,
        }
    }

    /// Estimates the orientation at every sample time, starting from the
    /// current state at `samples[0].t`.
    ///
    /// The gyroscope reading in sample `k` is the rate over `(t[k-1], t[k]]`,
    /// so the estimate at `t[k]` combines it with the accelerometer and
    /// magnetometer readings of sample `k - 1`. All three filters see the same
    /// information at every output.
    pub fn run(&mut self, samples: &[ImuSample]) -> Result<Vec<Quaternion>> {
        let mut out = Vec::with_capacity(samples.len());
        if samples.is_empty() {
            return Ok(out);
        }
        out.push(self.orientation());
        for pair in samples.windows(2) {
            self.step(pair[1].gyro, pair[0].acc, pair[0].mag)?;
            out.push(self.orientation());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_round_trips_through_str() {
        for k in FilterKind::ALL {
            assert_eq!(k.name().parse::<FilterKind>().unwrap(), k);
        }
        assert!("ukf".parse::<FilterKind>().is_err());
    }

    #[test]
    fn matched_tuning_values() {
        let s = 5f64.to_radians();
        let t = Tuning::matched(0.1, 0.0, s, 0.01, 0.01);
        assert!((t.beta - 3f64.sqrt() * s).abs() < 1e-15);
        assert!((t.madgwick_gain - t.beta / 2.0).abs() < 1e-15);
        assert!((t.mekf_process_var - (0.1 * s).powi(2)).abs() < 1e-18);
        assert_eq!(t.mekf_acc_var, 1e-4);
    }
}
