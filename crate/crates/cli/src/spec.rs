//! Command-line flags, config files and their resolution into an
//! [`ExperimentSpec`].

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, ValueEnum};
use orient_core::filter::FilterKind;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_RUNS: usize = 100;
pub const DEFAULT_OUTLIER_PROB: f64 = 0.05;
pub const DEFAULT_CONVERGENCE_ERROR_DEG: f64 = 90.0;
/// Samples kept in the convergence study; index 150 is the last one.
pub const CONVERGENCE_HORIZON: usize = 151;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Known Gaussian noise and known initial orientation.
    Gaussian,
    /// As `gaussian`, with accelerometer/magnetometer outliers.
    Outliers,
    /// Recovery from a large initial orientation error.
    Convergence,
    /// Filter a recorded IMU log (`--input`).
    File,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Gaussian => "gaussian",
            Scenario::Outliers => "outliers",
            Scenario::Convergence => "convergence",
            Scenario::File => "file",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterChoice {
    Fast,
    Madgwick,
    Mekf,
    All,
}

impl FilterChoice {
    pub fn kinds(self) -> Vec<FilterKind> {
        match self {
            FilterChoice::Fast => vec![FilterKind::Fast],
            FilterChoice::Madgwick => vec![FilterKind::Madgwick],
            FilterChoice::Mekf => vec![FilterKind::Mekf],
            FilterChoice::All => FilterKind::ALL.to_vec(),
        }
    }
}

/// Run the orientation filters on simulated or recorded IMU data.
///
/// Settings are resolved as built-in defaults, then `--config`, then the
/// flags given here.
#[derive(Debug, Default, Parser)]
#[command(name = "orient", version)]
pub struct Args {
    /// TOML file with any of the settings below (snake_case keys).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub scenario: Option<Scenario>,
    #[arg(long, value_enum)]
    pub filter: Option<FilterChoice>,
    /// Monte Carlo runs [default: 100].
    #[arg(long)]
    pub runs: Option<usize>,
    /// Base seed; run i uses seed + i [default: 42].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sampling rate in Hz [default: 10].
    #[arg(long)]
    pub fs: Option<f64>,
    /// Gain of the fast filter in rad/s [default: √3·sigma-gyro, or 2.4e-3 for files].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Gyroscope noise std in rad/s [default: 5π/180].
    #[arg(long)]
    pub sigma_gyro: Option<f64>,
    /// Accelerometer noise std, unit-norm scale [default: 0.01].
    #[arg(long)]
    pub sigma_acc: Option<f64>,
    /// Magnetometer noise std, unit-norm scale [default: 0.01].
    #[arg(long)]
    pub sigma_mag: Option<f64>,
    /// Outlier probability per sample and sensor; used by the outliers scenario [default: 0.05].
    #[arg(long)]
    pub outlier_prob: Option<f64>,
    /// Initial error in degrees about (1,1,1)/√3 [default: 90 for convergence, else 0].
    #[arg(long)]
    pub init_error_deg: Option<f64>,
    /// IMU log for the file scenario (columns t,gx,gy,gz,ax,ay,az,mx,my,mz).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Directory for summary.json and the CSV outputs [default: .].
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Magnetic dip angle in radians [default: 0 for simulations].
    #[arg(long, allow_hyphen_values = true)]
    pub dip: Option<f64>,
    /// Estimate the dip angle from the first samples of the log.
    #[arg(long)]
    pub estimate_dip: bool,
    /// Leading stationary samples used for gyroscope bias (and dip) estimation.
    #[arg(long)]
    pub bias_window: Option<usize>,
    /// Count arithmetic operations per filter step.
    #[arg(long)]
    pub count_ops: bool,
    /// Time one filter step.
    #[arg(long)]
    pub bench: bool,
}

/// Contents of a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: Option<Scenario>,
    pub filter: Option<FilterChoice>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub fs: Option<f64>,
    pub beta: Option<f64>,
    pub sigma_gyro: Option<f64>,
    pub sigma_acc: Option<f64>,
    pub sigma_mag: Option<f64>,
    pub outlier_prob: Option<f64>,
    pub init_error_deg: Option<f64>,
    pub input: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub dip: Option<f64>,
    pub estimate_dip: Option<bool>,
    pub bias_window: Option<usize>,
    pub count_ops: Option<bool>,
    pub bench: Option<bool>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// A fully resolved experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub filter: FilterChoice,
    pub runs: usize,
    pub seed: u64,
    pub fs: f64,
    /// Explicit fast-filter gain; `None` uses the scenario default.
    pub beta: Option<f64>,
    pub sigma_gyro: f64,
    pub sigma_acc: f64,
    pub sigma_mag: f64,
    pub outlier_prob: f64,
    pub init_error_deg: f64,
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub dip: Option<f64>,
    pub estimate_dip: bool,
    pub bias_window: usize,
    pub count_ops: bool,
    pub bench: bool,
}

impl ExperimentSpec {
    /// Merges defaults, the config file named by `args` (if any) and `args`.
    pub fn resolve(args: &Args) -> anyhow::Result<Self> {
        let file = match &args.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        Self::merge(&file, args)
    }

    pub fn merge(file: &ConfigFile, args: &Args) -> anyhow::Result<Self> {
        let scenario = args
            .scenario
            .or(file.scenario)
            .unwrap_or(Scenario::Gaussian);
        let init_default = match scenario {
            Scenario::Convergence => DEFAULT_CONVERGENCE_ERROR_DEG,
            _ => 0.0,
        };
        let spec = Self {
            scenario,
            filter: args.filter.or(file.filter).unwrap_or(FilterChoice::All),
            runs: args.runs.or(file.runs).unwrap_or(DEFAULT_RUNS),
            seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            fs: args.fs.or(file.fs).unwrap_or(10.0),
            beta: args.beta.or(file.beta),
            sigma_gyro: args
                .sigma_gyro
                .or(file.sigma_gyro)
                .unwrap_or(5.0 * PI / 180.0),
            sigma_acc: args.sigma_acc.or(file.sigma_acc).unwrap_or(0.01),
            sigma_mag: args.sigma_mag.or(file.sigma_mag).unwrap_or(0.01),
            outlier_prob: args
                .outlier_prob
                .or(file.outlier_prob)
                .unwrap_or(DEFAULT_OUTLIER_PROB),
            init_error_deg: args
                .init_error_deg
                .or(file.init_error_deg)
                .unwrap_or(init_default),
            input: args.input.clone().or_else(|| file.input.clone()),
            output_dir: args
                .output_dir
                .clone()
                .or_else(|| file.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from(".")),
            dip: args.dip.or(file.dip),
            estimate_dip: args.estimate_dip || file.estimate_dip.unwrap_or(false),
            bias_window: args.bias_window.or(file.bias_window).unwrap_or(0),
            count_ops: args.count_ops || file.count_ops.unwrap_or(false),
            bench: args.bench || file.bench.unwrap_or(false),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.runs == 0 {
            bail!("--runs must be at least 1");
        }
        if let Some(b) = self.beta {
            if !(b.is_finite() && b >= 0.0) {
                bail!("--beta must be non-negative, got {b}");
            }
        }
        if !(0.0..=1.0).contains(&self.outlier_prob) {
            bail!(
                "--outlier-prob must lie in [0, 1], got {}",
                self.outlier_prob
            );
        }
        if !self.init_error_deg.is_finite() {
            bail!("--init-error-deg must be finite");
        }
        match self.scenario {
            Scenario::File => {
                if self.input.is_none() {
                    bail!("the file scenario needs --input");
                }
                if self.dip.is_none() && !self.estimate_dip {
                    bail!("the file scenario needs --dip or --estimate-dip");
                }
                if self.dip.is_some() && self.estimate_dip {
                    bail!("--dip and --estimate-dip are mutually exclusive");
                }
            }
            _ => {
                if self.input.is_some() {
                    bail!("--input is only used by the file scenario");
                }
                if self.estimate_dip {
                    bail!("--estimate-dip is only used by the file scenario");
                }
            }
        }
        Ok(())
    }

    /// Outlier probability actually applied to the simulation.
    pub fn effective_outlier_prob(&self) -> f64 {
        match self.scenario {
            Scenario::Outliers => self.outlier_prob,
            _ => 0.0,
        }
    }
}
