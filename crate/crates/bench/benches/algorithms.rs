// SPDX-License-Identifier: MIT OR Apache-2.0

use std::hint::black_box;

use bimetal_bench::{feature_matrix, step_series, two_regime_params};
use bimetal_core::changepoint::{detect, CostMode, CpConfig};
use bimetal_core::msar::{em_fit, regime_probabilities, simulate, EmConfig, MsSpec, SimulationOptions};
use bimetal_core::som::{hac_macro_classes, train_som, SomSchedule};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn filter(c: &mut Criterion) {
    let params = two_regime_params();
    let mut group = c.benchmark_group("filter_and_smoother");
    for len in [500, 2078] {
        let series = simulate(&params, len, 1, &SimulationOptions::default()).unwrap().series;
        group.bench_with_input(BenchmarkId::from_parameter(len), &series, |b, s| {
            b.iter(|| regime_probabilities(&params, black_box(s)).unwrap())
        });
    }
    group.finish();
}

fn em(c: &mut Criterion) {
    let series = simulate(&two_regime_params(), 1000, 2, &SimulationOptions::default())
        .unwrap()
        .series;
    let config = EmConfig {
        n_restarts: 1,
        ..EmConfig::default()
    };
    let mut group = c.benchmark_group("em_fit");
    group.sample_size(10);
    group.bench_function("linear_1000", |b| {
        b.iter(|| em_fit(&MsSpec::linear(2, 1), black_box(&series), None, &config).unwrap())
    });
    group.finish();
}

fn changepoints(c: &mut Criterion) {
    let mut group = c.benchmark_group("detect");
    group.sample_size(10);
    for len in [500, 2078] {
        let series = step_series(len, 3);
        for mode in [CostMode::MeanOnly, CostMode::MeanAndVariance] {
            group.bench_with_input(BenchmarkId::new(mode.name(), len), &series, |b, s| {
                b.iter(|| detect(black_box(s), mode, &CpConfig::default()).unwrap())
            });
        }
    }
    group.finish();
}

fn som(c: &mut Criterion) {
    let data = feature_matrix(2078, 4);
    let schedule = SomSchedule {
        epochs: 10,
        ..SomSchedule::default()
    };
    let mut group = c.benchmark_group("som");
    group.sample_size(10);
    group.bench_function("train_5x5_10_epochs", |b| {
        b.iter(|| train_som(black_box(&data), 5, 5, &schedule, 1).unwrap())
    });
    let grid = train_som(&data, 5, 5, &schedule, 1).unwrap();
    group.bench_function("ward_cut_6", |b| b.iter(|| hac_macro_classes(black_box(&grid), 6).unwrap()));
    group.finish();
}

criterion_group!(benches, filter, em, changepoints, som);
criterion_main!(benches);
