//! Reference filters the gradient-descent estimator is compared against.

pub mod madgwick;
pub mod mekf;

pub use madgwick::{madgwick_gain_from_gyro_sigma, madgwick_step, MadgwickConfig, MadgwickState};
pub use mekf::{measurement_jacobian, mekf_predict, mekf_step, mekf_update, MekfConfig, MekfState};
