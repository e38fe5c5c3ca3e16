//! Experiment runner behind the `orient` binary.
//!
//! [`run_experiment`] renders every output in memory first and only then
//! touches the output directory, so a failing run leaves no partial files.

pub mod spec;

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Context;
use orient_core::baselines::mekf::large_init_variance;
use orient_core::estimator::init_from_accmag;
use orient_core::evaluation::{
    count_ops, initial_estimate, mekf_init_variance, run_reports, summarize, time_per_iteration,
    McSummary,
};
use orient_core::io::{
    ingest_csv, to_json_string, write_convergence_csv, write_orientation_csv, write_rmse_table_csv,
    DipSource, IngestOptions, TableRow,
};
use orient_core::simulator::simulate;
use orient_core::{Filter, FilterKind, Quaternion, SimConfig, Tuning, Vec3};
use serde::Serialize;

pub use spec::{Args, ExperimentSpec, FilterChoice, Scenario};

/// Iterations timed per filter with `--bench`.
pub const BENCH_ITERS: usize = 200_000;

/// What a finished experiment produced.
#[derive(Debug)]
pub struct Outcome {
    /// Human-readable results table.
    pub table: String,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Checkpoint {
    index: usize,
    mean_deg: f64,
    lo_deg: f64,
    hi_deg: f64,
}

#[derive(Serialize)]
struct SimFilterResult {
    filter: FilterKind,
    rmse_deg: [f64; 3],
    run_rmse_deg: Vec<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    op_count: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    time_per_iter_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    checkpoint: Option<Checkpoint>,
    curves: McSummary,
}

#[derive(Serialize)]
struct SimSummary<'a> {
    scenario: &'static str,
    runs: usize,
    seed: u64,
    samples_per_run: usize,
    sim: &'a SimConfig,
    tuning: &'a Tuning,
    filters: Vec<SimFilterResult>,
}

#[derive(Serialize)]
struct FileFilterResult {
    filter: FilterKind,
    final_orientation: [f64; 4],
    #[serde(skip_serializing_if = "Option::is_none")]
    op_count: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    time_per_iter_s: Option<f64>,
}

#[derive(Serialize)]
struct FileSummary<'a> {
    scenario: &'static str,
    input: String,
    samples: usize,
    sample_time: f64,
    dip: f64,
    gyro_bias: Vec3,
    initial_orientation: [f64; 4],
    tuning: &'a Tuning,
    filters: Vec<FileFilterResult>,
}

struct PrintRow {
    filter: FilterKind,
    rmse_deg: Option<[f64; 3]>,
    time_per_iter_s: Option<f64>,
    op_count: Option<u64>,
}

/// Rendered outputs, written together at the end.
struct Outputs(Vec<(String, Vec<u8>)>);

impl Outputs {
    fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.0.push((name.into(), bytes));
    }

    fn write_all(self, dir: &std::path::Path) -> anyhow::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        self.0
            .into_iter()
            .map(|(name, bytes)| {
                let path = dir.join(name);
                std::fs::write(&path, bytes)
                    .with_context(|| format!("writing {}", path.display()))?;
                Ok(path)
            })
            .collect()
    }
}

/// Unit axis of the initial-error rotation.
pub fn init_error_axis() -> Vec3 {
    Vec3::new(1.0, 1.0, 1.0).scale(1.0 / 3f64.sqrt())
}

/// Simulation settings described by `spec`.
pub fn sim_config(spec: &ExperimentSpec) -> SimConfig {
    SimConfig {
        fs: spec.fs,
        dip: spec.dip.unwrap_or(0.0),
        sigma_omega: spec.sigma_gyro,
        sigma_acc: spec.sigma_acc,
        sigma_mag: spec.sigma_mag,
        outlier_prob: spec.effective_outlier_prob(),
        seed: spec.seed,
        init_error: init_error_axis().scale(spec.init_error_deg.to_radians()),
        ..SimConfig::default()
    }
}

/// Tuning matched to the simulated noise, with an optional `β` override.
pub fn sim_tuning(spec: &ExperimentSpec, sim: &SimConfig) -> Tuning {
    let mut t = Tuning::matched(
        sim.sample_time(),
        sim.dip,
        sim.sigma_omega,
        sim.sigma_acc,
        sim.sigma_mag,
    );
    if let Some(b) = spec.beta {
        t.beta = b;
    }
    t
}

fn orientation_name(choice: FilterChoice, kind: FilterKind) -> String {
    if choice == FilterChoice::All && kind != FilterKind::Fast {
        format!("orientation_{kind}.csv")
    } else {
        "orientation.csv".to_string()
    }
}

fn instruments(
    spec: &ExperimentSpec,
    kind: FilterKind,
    tuning: &Tuning,
) -> anyhow::Result<(Option<u64>, Option<f64>)> {
    let ops = if spec.count_ops {
        Some(count_ops(kind, tuning)?)
    } else {
        None
    };
    let time = if spec.bench {
        Some(time_per_iteration(kind, BENCH_ITERS)?)
    } else {
        None
    };
    Ok((ops, time))
}

fn orientation_csv(times: &[f64], q: &[Quaternion]) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_orientation_csv(&mut buf, times, q)?;
    Ok(buf)
}

/// Runs `spec`, writes its outputs and returns the results table.
pub fn run_experiment(spec: &ExperimentSpec) -> anyhow::Result<Outcome> {
    let (title, rows, outputs) = match spec.scenario {
        Scenario::File => run_file(spec)?,
        _ => run_simulated(spec)?,
    };
    let table = render_table(&title, &rows);
    let files = outputs.write_all(&spec.output_dir)?;
    Ok(Outcome { table, files })
}

fn run_simulated(spec: &ExperimentSpec) -> anyhow::Result<(String, Vec<PrintRow>, Outputs)> {
    let sim = sim_config(spec);
    let tuning = sim_tuning(spec, &sim);
    let horizon = match spec.scenario {
        Scenario::Convergence => Some(spec::CONVERGENCE_HORIZON.min(sim.len())),
        _ => None,
    };
    let n = horizon.unwrap_or(sim.len());
    let mut outputs = Outputs(Vec::new());
    let mut results = Vec::new();
    let mut rows = Vec::new();
    let mut table_rows = Vec::new();

    for kind in spec.filter.kinds() {
        let reports = run_reports(kind, &sim, &tuning, spec.runs, horizon)
            .with_context(|| format!("running {kind}"))?;
        let curves = summarize(kind, &reports);
        let (op_count, time) = instruments(spec, kind, &tuning)?;
        let checkpoint = (spec.scenario == Scenario::Convergence).then(|| {
            let index = n - 1;
            let (lo, hi) = curves.band(index);
            Checkpoint {
                index,
                mean_deg: curves.mean_angle_deg[index],
                lo_deg: lo,
                hi_deg: hi,
            }
        });

        // Estimates of the first run, for orientation output.
        let (mut truth, log) = simulate(&sim)?;
        truth.samples.truncate(n);
        let mut filter = Filter::new(
            kind,
            &tuning,
            initial_estimate(&truth, &sim),
            mekf_init_variance(&sim),
        )?;
        let est = filter.run(&log.samples[..n])?;
        let times: Vec<f64> = truth.samples.iter().map(|s| s.t).collect();
        outputs.add(
            orientation_name(spec.filter, kind),
            orientation_csv(&times, &est)?,
        );

        rows.push(PrintRow {
            filter: kind,
            rmse_deg: Some(curves.rmse_deg),
            time_per_iter_s: time,
            op_count,
        });
        table_rows.push(TableRow {
            filter: kind.to_string(),
            rmse_deg: curves.rmse_deg,
            time_per_iter_s: time,
            op_count,
        });
        results.push(SimFilterResult {
            filter: kind,
            rmse_deg: curves.rmse_deg,
            run_rmse_deg: reports.iter().map(|r| r.rmse_deg).collect(),
            op_count,
            time_per_iter_s: time,
            checkpoint,
            curves,
        });
    }

    let mut table_csv = Vec::new();
    write_rmse_table_csv(&mut table_csv, &table_rows)?;
    let mut conv_csv = Vec::new();
    let curves: Vec<McSummary> = results.iter().map(|r| r.curves.clone()).collect();
    write_convergence_csv(&mut conv_csv, &curves)?;

    let summary = SimSummary {
        scenario: spec.scenario.name(),
        runs: spec.runs,
        seed: spec.seed,
        samples_per_run: n,
        sim: &sim,
        tuning: &tuning,
        filters: results,
    };
    outputs.add("summary.json", to_json_string(&summary)?.into_bytes());
    outputs.add("rmse_table.csv", table_csv);
    outputs.add("convergence.csv", conv_csv);

    let mut title = format!(
        "scenario {}: {} run(s) x {} samples, seed {}",
        spec.scenario.name(),
        spec.runs,
        n,
        spec.seed
    );
    if let Some(cp) = summary.filters.iter().find_map(|f| f.checkpoint.as_ref()) {
        let _ = write!(title, "; rotation error at sample {} below", cp.index);
    }
    if spec.scenario == Scenario::Convergence {
        // Report the checkpoint instead of whole-horizon RMSE.
        for (row, res) in rows.iter_mut().zip(&summary.filters) {
            if let Some(cp) = &res.checkpoint {
                row.rmse_deg = Some([cp.mean_deg, cp.lo_deg, cp.hi_deg]);
            }
        }
    }
    Ok((title, rows, outputs))
}

fn run_file(spec: &ExperimentSpec) -> anyhow::Result<(String, Vec<PrintRow>, Outputs)> {
    let input = spec
        .input
        .as_ref()
        .expect("validated: file scenario has input");
    let opts = IngestOptions {
        bias_window: spec.bias_window,
        dip: if spec.estimate_dip {
            DipSource::Estimate
        } else {
            DipSource::Fixed(spec.dip.expect("validated: dip given"))
        },
        beta: spec.beta.unwrap_or(Tuning::experimental(1.0, 0.0).beta),
    };
    let ingested =
        ingest_csv(input, &opts).with_context(|| format!("reading {}", input.display()))?;
    let cfg = ingested.config;
    let mut tuning = Tuning::experimental(cfg.sample_time, cfg.dip);
    tuning.beta = cfg.beta;
    let first = ingested.samples[0];
    let q0 = init_from_accmag(first.acc, first.mag).context("initial orientation")?;
    let times: Vec<f64> = ingested.samples.iter().map(|s| s.t).collect();

    let mut outputs = Outputs(Vec::new());
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for kind in spec.filter.kinds() {
        let mut filter = Filter::new(kind, &tuning, q0, large_init_variance())?;
        let est = filter
            .run(&ingested.samples)
            .with_context(|| format!("running {kind}"))?;
        outputs.add(
            orientation_name(spec.filter, kind),
            orientation_csv(&times, &est)?,
        );
        let (op_count, time) = instruments(spec, kind, &tuning)?;
        rows.push(PrintRow {
            filter: kind,
            rmse_deg: None,
            time_per_iter_s: time,
            op_count,
        });
        results.push(FileFilterResult {
            filter: kind,
            final_orientation: est.last().copied().unwrap_or(q0).to_array(),
            op_count,
            time_per_iter_s: time,
        });
    }
    let summary = FileSummary {
        scenario: spec.scenario.name(),
        input: input.display().to_string(),
        samples: ingested.samples.len(),
        sample_time: cfg.sample_time,
        dip: cfg.dip,
        gyro_bias: ingested.gyro_bias,
        initial_orientation: q0.to_array(),
        tuning: &tuning,
        filters: results,
    };
    outputs.add("summary.json", to_json_string(&summary)?.into_bytes());
    let title = format!(
        "scenario file: {} samples from {}, T = {:.6} s, dip = {:.4} rad",
        summary.samples, summary.input, cfg.sample_time, cfg.dip
    );
    Ok((title, rows, outputs))
}

fn render_table(title: &str, rows: &[PrintRow]) -> String {
    let convergence = title.contains("rotation error");
    let (a, b, c) = if convergence {
        ("mean[deg]", "-2std[deg]", "+2std[deg]")
    } else {
        ("roll[deg]", "pitch[deg]", "yaw[deg]")
    };
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(
        out,
        "{:<10} {:>11} {:>11} {:>11} {:>14} {:>6}",
        "filter", a, b, c, "time/iter[us]", "ops"
    );
    for r in rows {
        let cells = match r.rmse_deg {
            Some(v) => v.map(|x| format!("{x:.4}")),
            None => ["-".to_string(), "-".to_string(), "-".to_string()],
        };
        let time = r
            .time_per_iter_s
            .map_or("-".to_string(), |t| format!("{:.4}", t * 1e6));
        let ops = r.op_count.map_or("-".to_string(), |n| n.to_string());
        let _ = writeln!(
            out,
            "{:<10} {:>11} {:>11} {:>11} {:>14} {:>6}",
            r.filter.name(),
            cells[0],
            cells[1],
            cells[2],
            time,
            ops
        );
    }
    out
}
