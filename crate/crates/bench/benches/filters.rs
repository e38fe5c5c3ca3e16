use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use orient_bench::fixture;
use orient_core::baselines::mekf::KNOWN_INIT_VARIANCE;
use orient_core::baselines::{madgwick_step, mekf_step, MadgwickState, MekfState};
use orient_core::estimator::step;
use orient_core::FilterState;

fn filter_steps(c: &mut Criterion) {
    let fx = fixture();
    let mut group = c.benchmark_group("step");

    let cfg = fx.tuning.fast_config().unwrap();
    let mut st = FilterState::new(fx.initial);
    let mut samples = fx.samples.iter().cycle();
    group.bench_function("fast", |b| {
        b.iter(|| {
            let s = black_box(samples.next().unwrap());
            st = step(&st, s.gyro, s.acc, s.mag, &cfg).unwrap();
        })
    });

    let cfg = fx.tuning.madgwick_config().unwrap();
    let mut st = MadgwickState::new(fx.initial);
    let mut samples = fx.samples.iter().cycle();
    group.bench_function("madgwick", |b| {
        b.iter(|| {
            let s = black_box(samples.next().unwrap());
            st = madgwick_step(&st, s.gyro, s.acc, s.mag, &cfg).unwrap();
        })
    });

    let cfg = fx.tuning.mekf_config().unwrap();
    let mut st = MekfState::with_variance(fx.initial, KNOWN_INIT_VARIANCE);
    let mut samples = fx.samples.iter().cycle();
    group.bench_function("mekf", |b| {
        b.iter(|| {
            let s = black_box(samples.next().unwrap());
            st = mekf_step(&st, s.gyro, s.acc, s.mag, &cfg).unwrap();
        })
    });

    group.finish();
}

criterion_group!(benches, filter_steps);
criterion_main!(benches);
