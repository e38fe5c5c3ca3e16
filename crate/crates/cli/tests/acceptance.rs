//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Monte Carlo criteria use 100 runs of the standard 8000-sample
//! protocol with base seed 42.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use orient_cli::init_error_axis;
use orient_core::estimator::{gradient_v, gravity_ref, mag_ref};
use orient_core::evaluation::{
    convergence_curves, count_ops, run_monte_carlo, run_single, time_per_iteration, McSummary,
};
use orient_core::io::write_measurement_log;
use orient_core::rotmath::{exp_r, quat_exp, quat_mul, quat_to_rotmat, s_matrix};
use orient_core::simulator::simulate;
use orient_core::{FilterConfig, FilterKind, Quaternion, SimConfig, Tuning, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const SEED: u64 = 42;
const RUNS: usize = 100;

struct Suite {
    failures: usize,
    total: usize,
}

impl Suite {
    fn report(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        self.total += 1;
        if !pass {
            self.failures += 1;
        }
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {id:>2} {name}: {detail}");
    }
}

fn gaussian_cfg() -> SimConfig {
    SimConfig {
        seed: SEED,
        ..SimConfig::default()
    }
}

fn matched(cfg: &SimConfig) -> Tuning {
    Tuning::matched(
        cfg.sample_time(),
        cfg.dip,
        cfg.sigma_omega,
        cfg.sigma_acc,
        cfg.sigma_mag,
    )
}

fn fmt3(v: [f64; 3]) -> String {
    format!("({:.3}, {:.3}, {:.3})", v[0], v[1], v[2])
}

fn within(v: [f64; 3], target: [f64; 3], tol: f64) -> bool {
    (0..3).all(|i| (v[i] - target[i]).abs() <= tol)
}

fn mc(kind: FilterKind, cfg: &SimConfig) -> [f64; 3] {
    run_monte_carlo(kind, cfg, &matched(cfg), RUNS)
        .expect("Monte Carlo run")
        .rmse_deg
}

fn gaussian_vec(rng: &mut ChaCha8Rng, s: f64) -> Vec3 {
    let mut d = || rng.sample::<f64, _>(StandardNormal) * s;
    Vec3::new(d(), d(), d())
}

fn random_quat(rng: &mut ChaCha8Rng) -> Quaternion {
    let v = gaussian_vec(rng, 1.0);
    Quaternion::from_parts(rng.sample(StandardNormal), v).normalize()
}

/// Largest relative error of `gradient_v` against central differences of the
/// exact cost over 100 random configurations.
fn gradient_oracle() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let q_hat = random_quat(&mut rng);
        let dip = rng.random_range(-1.2..1.2);
        let q_true = q_hat * quat_exp(gaussian_vec(&mut rng, 0.2));
        let y_a = -q_true.rotate_inverse(gravity_ref()) + gaussian_vec(&mut rng, 0.05);
        let y_m = q_true.rotate_inverse(mag_ref(dip)) + gaussian_vec(&mut rng, 0.05);
        let g_b = q_hat.rotate_inverse(gravity_ref());
        let m_b = q_hat.rotate_inverse(mag_ref(dip));
        let cost = |eta: Vec3| {
            let e_t = exp_r(eta).transpose();
            let ra = y_a + e_t.mul_vec(g_b);
            let rm = y_m - e_t.mul_vec(m_b);
            0.5 * (ra.norm_squared() + rm.norm_squared())
        };
        let cfg = FilterConfig::new(0.1, 0.15, dip).unwrap();
        let analytic = gradient_v(q_hat, y_a, y_m, &cfg);
        let mut fd = [0.0; 3];
        for (i, slot) in fd.iter_mut().enumerate() {
            let mut e = [0.0; 3];
            e[i] = h;
            let e = Vec3::from_array(e);
            *slot = (cost(e) - cost(-e)) / (2.0 * h);
        }
        let fd = Vec3::from_array(fd);
        worst = worst.max((analytic - fd).norm() / fd.norm());
    }
    worst
}

/// (max Frobenius gap of exp_q vs exp_R, max relative S(q) Jacobian error).
fn kinematics_oracle() -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut exp_gap: f64 = 0.0;
    let mut checked = 0;
    while checked < 1000 {
        let y = Vec3::new(
            rng.random_range(-3.15..3.15),
            rng.random_range(-3.15..3.15),
            rng.random_range(-3.15..3.15),
        );
        if y.norm() > std::f64::consts::PI {
            continue;
        }
        checked += 1;
        let r = quat_to_rotmat(quat_exp(y)).unwrap();
        exp_gap = exp_gap.max((r - exp_r(y.scale(2.0))).norm_fro());
    }

    let h = 1e-6;
    let mut jac_err: f64 = 0.0;
    for _ in 0..1000 {
        let q = random_quat(&mut rng);
        let w = gaussian_vec(&mut rng, 1.0);
        let plus = quat_mul(q, quat_exp(w.scale(0.5 * h))).to_array();
        let minus = quat_mul(q, quat_exp(w.scale(-0.5 * h))).to_array();
        let s = s_matrix(q);
        let wa = w.to_array();
        for i in 0..4 {
            let fd = (plus[i] - minus[i]) / (2.0 * h);
            let analytic = 0.5 * (0..3).map(|j| s[(i, j)] * wa[j]).sum::<f64>();
            jac_err = jac_err.max((fd - analytic).abs() / (1.0 + analytic.abs()));
        }
    }
    (exp_gap, jac_err)
}

fn run_cli(args: &[&str], out: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_orient"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    std::fs::read(out.join("summary.json")).map_err(|e| e.to_string())
}

fn determinism() -> Result<usize, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let log_path = dir.path().join("log.csv");
    let (_, log) = simulate(&SimConfig {
        n_cycles: 1,
        seed: SEED,
        ..SimConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    write_measurement_log(&mut buf, &log).map_err(|e| e.to_string())?;
    std::fs::write(&log_path, buf).map_err(|e| e.to_string())?;
    let log_arg = log_path.to_str().unwrap().to_string();

    let scenarios: Vec<Vec<&str>> = vec![
        vec!["--scenario", "gaussian", "--runs", "4", "--seed", "42"],
        vec!["--scenario", "outliers", "--runs", "4", "--seed", "42"],
        vec!["--scenario", "convergence", "--runs", "4", "--seed", "42"],
        vec![
            "--scenario",
            "file",
            "--input",
            &log_arg,
            "--dip",
            "0",
            "--count-ops",
        ],
    ];
    for (i, args) in scenarios.iter().enumerate() {
        let a = run_cli(args, &dir.path().join(format!("a{i}")))?;
        let b = run_cli(args, &dir.path().join(format!("b{i}")))?;
        if a != b {
            return Err(format!("summary.json differs for {}", args.join(" ")));
        }
    }
    Ok(scenarios.len())
}

fn band_text(s: &McSummary, k: usize) -> String {
    let (lo, hi) = s.band(k);
    format!("{:.3} [{:.3}, {:.3}]", s.mean_angle_deg[k], lo, hi)
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut suite = Suite {
        failures: 0,
        total: 0,
    };
    println!("acceptance suite ({RUNS} runs x 8000 samples, seed {SEED})");

    let g = gaussian_cfg();
    let fast = mc(FilterKind::Fast, &g);
    let mad = mc(FilterKind::Madgwick, &g);
    let mekf = mc(FilterKind::Mekf, &g);
    let o = SimConfig {
        outlier_prob: 0.05,
        ..g
    };
    let fast_o = mc(FilterKind::Fast, &o);
    let mad_o = mc(FilterKind::Madgwick, &o);
    let mekf_o = mc(FilterKind::Mekf, &o);

    let target = [0.71, 0.66, 0.71];
    suite.report(
        1,
        "Gaussian RMSE, fast filter",
        within(fast, target, 0.15),
        format!("{} vs {} ± 0.15 deg", fmt3(fast), fmt3(target)),
    );
    let target = [0.72, 0.65, 0.71];
    suite.report(
        2,
        "Gaussian RMSE, Madgwick",
        within(mad, target, 0.15),
        format!("{} vs {} ± 0.15 deg", fmt3(mad), fmt3(target)),
    );
    let target = [0.66, 0.60, 0.66];
    let not_worse = (0..3).all(|i| mekf[i] <= fast[i] + 0.05);
    suite.report(
        3,
        "Gaussian RMSE, MEKF",
        within(mekf, target, 0.15) && not_worse,
        format!(
            "{} vs {} ± 0.15 deg; MEKF <= fast + 0.05 per axis: {not_worse}",
            fmt3(mekf),
            fmt3(target)
        ),
    );
    let fast_ok = within(fast_o, [0.77, 0.72, 0.77], 0.2);
    let mad_ok = within(mad_o, [0.78, 0.72, 0.78], 0.2);
    let mekf_ok = (0..3).all(|i| (4.0..=15.0).contains(&mekf_o[i]) && mekf_o[i] >= 4.0 * fast_o[i]);
    suite.report(
        4,
        "5% outlier RMSE",
        fast_ok && mad_ok && mekf_ok,
        format!(
            "fast {} (±0.2 of 0.77/0.72/0.77) {fast_ok}; madgwick {} (±0.2 of 0.78/0.72/0.78) {mad_ok}; \
             mekf {} (in [4,15] and >= 4x fast) {mekf_ok}",
            fmt3(fast_o),
            fmt3(mad_o),
            fmt3(mekf_o)
        ),
    );

    let tuning = matched(&g);
    let ops_fast = count_ops(FilterKind::Fast, &tuning).unwrap();
    let ops_mad = count_ops(FilterKind::Madgwick, &tuning).unwrap();
    let ratio = ops_fast as f64 / ops_mad as f64;
    let fast_band = (ops_fast as f64 - 140.0).abs() <= 0.25 * 140.0 && ops_fast <= 160;
    let mad_band = (ops_mad as f64 - 218.0).abs() <= 0.25 * 218.0;
    suite.report(
        5,
        "operation counts",
        ratio <= 0.72 && fast_band && mad_band,
        format!(
            "fast {ops_fast} (140 ± 25%, <= 160), madgwick {ops_mad} (218 ± 25%), ratio {ratio:.3} (<= 0.72)"
        ),
    );

    let t_fast = time_per_iteration(FilterKind::Fast, 200_000).unwrap();
    let t_mad = time_per_iteration(FilterKind::Madgwick, 200_000).unwrap();
    let t_mekf = time_per_iteration(FilterKind::Mekf, 200_000).unwrap();
    suite.report(
        6,
        "time per iteration",
        t_fast < t_mad && t_fast < t_mekf / 3.0,
        format!(
            "fast {:.1} ns, madgwick {:.1} ns ({:.0}% faster), mekf {:.1} ns ({:.1}x)",
            t_fast * 1e9,
            t_mad * 1e9,
            100.0 * (1.0 - t_fast / t_mad),
            t_mekf * 1e9,
            t_mekf / t_fast
        ),
    );

    let c = SimConfig {
        init_error: init_error_axis().scale(90f64.to_radians()),
        ..g
    };
    let k = 150;
    let curves: Vec<McSummary> = FilterKind::ALL
        .iter()
        .map(|&kind| convergence_curves(kind, &c, &tuning, RUNS, k + 1).unwrap())
        .collect();
    let m: Vec<f64> = curves.iter().map(|s| s.mean_angle_deg[k]).collect();
    suite.report(
        7,
        "convergence ranking at sample 150 (mean [2-std band], deg)",
        m[2] < m[0] && m[0] < m[1],
        format!(
            "mekf {} < fast {} < madgwick {}",
            band_text(&curves[2], k),
            band_text(&curves[0], k),
            band_text(&curves[1], k)
        ),
    );

    let worst = gradient_oracle();
    suite.report(
        8,
        "gradient vs finite differences",
        worst <= 1e-6,
        format!("max relative error {worst:.2e} over 100 configurations (<= 1e-6)"),
    );

    let (exp_gap, jac_err) = kinematics_oracle();
    suite.report(
        9,
        "exp_q / exp_R and S(q) Jacobian",
        exp_gap < 1e-9 && jac_err <= 1e-6,
        format!("Frobenius gap {exp_gap:.2e} (< 1e-9), S(q) error {jac_err:.2e} (<= 1e-6)"),
    );

    match determinism() {
        Ok(n) => suite.report(
            10,
            "byte-identical summary.json",
            true,
            format!("{n} scenarios run twice with the same seed"),
        ),
        Err(e) => suite.report(10, "byte-identical summary.json", false, e),
    }

    let z = gaussian_cfg().noiseless();
    let report = run_single(FilterKind::Fast, &z, &tuning, None).unwrap();
    let last = *report.angle_errors_deg.last().unwrap();
    suite.report(
        11,
        "zero-noise tracking",
        last < 1.0,
        format!("final rotation error {last:.4} deg (< 1)"),
    );

    println!(
        "{} of {} criteria passed in {:.1} s",
        suite.total - suite.failures,
        suite.total,
        started.elapsed().as_secs_f64()
    );
    if suite.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
