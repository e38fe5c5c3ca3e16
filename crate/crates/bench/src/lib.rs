//! Shared fixtures for the filter benchmarks.

use orient_core::simulator::simulate;
use orient_core::{ImuSample, Quaternion, SimConfig, Tuning};

/// One cycle of the standard simulated trajectory with matched tuning.
pub struct Fixture {
    pub tuning: Tuning,
    pub initial: Quaternion,
    pub samples: Vec<ImuSample>,
}

pub fn fixture() -> Fixture {
    let cfg = SimConfig {
        n_cycles: 1,
        seed: 7,
        ..SimConfig::default()
    };
    let (truth, log) = simulate(&cfg).expect("default simulation is valid");
    Fixture {
        tuning: Tuning::matched(
            cfg.sample_time(),
            cfg.dip,
            cfg.sigma_omega,
            cfg.sigma_acc,
            cfg.sigma_mag,
        ),
        initial: truth.samples[0].q,
        samples: log.samples,
    }
}
