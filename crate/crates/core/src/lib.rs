//! Orientation estimation from gyroscope, accelerometer and magnetometer data.
//!
//! The main filter ([`estimator`]) integrates the gyroscope and corrects the
//! drift with a single, fixed-length gradient-descent step on a
//! rotation-vector deviation. Two reference filters live in [`baselines`]: a
//! quaternion gradient-descent filter and a multiplicative EKF. The
//! [`simulator`] and [`evaluation`] modules reproduce Monte Carlo comparisons
//! of the three, and [`io`] handles CSV logs and reports.
//!
//! Every filter step is generic over [`Scalar`], so the same code runs on
//! `f64` and on the op-counting [`Counted`] type.

pub mod baselines;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod filter;
pub mod io;
pub mod linalg;
pub mod rotmath;
pub mod scalar;
pub mod simulator;

pub use error::{Error, Result};
pub use estimator::{FilterConfig, FilterState};
pub use filter::{Filter, FilterKind, ImuSample, Tuning};
pub use linalg::{Mat3, Matrix, Vec3};
pub use rotmath::{Quaternion, RotMat};
pub use scalar::{Counted, Scalar};
pub use simulator::{GroundTruth, MeasurementLog, SimConfig};
