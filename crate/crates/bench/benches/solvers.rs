use std::hint::black_box;

use agejam_core::verify::{scenario, SCENARIO_1, SCENARIO_2};
use agejam_core::{
    average_reward, find_threshold_alg1, find_threshold_breakpoints, find_threshold_scan,
    rvi_solve, simulate_aggregate, simulate_full, to_chain, AttackPolicy, Metric, RviConfig,
    SearchConfig, SimConfig,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn closed_form(c: &mut Criterion) {
    let chain = to_chain(&scenario(SCENARIO_1, 1.0), Metric::Aoii);
    c.bench_function("average_reward n=0..100", |b| {
        b.iter(|| {
            (0..100u64)
                .map(|n| average_reward(black_box(&chain), n, 3.0).reward)
                .sum::<f64>()
        })
    });
}

fn threshold_search(c: &mut Criterion) {
    let mut group = c.benchmark_group("threshold_search");
    for (name, which) in [("scenario1", SCENARIO_1), ("scenario2", SCENARIO_2)] {
        let chain = to_chain(&scenario(which, 1.0), Metric::Aoi);
        let config = SearchConfig::for_chain(&chain);
        group.bench_with_input(BenchmarkId::new("breakpoints", name), &chain, |b, ch| {
            b.iter(|| find_threshold_breakpoints(ch, black_box(7.3)))
        });
        group.bench_with_input(BenchmarkId::new("alg1", name), &chain, |b, ch| {
            b.iter(|| find_threshold_alg1(ch, black_box(7.3), &config))
        });
        group.bench_with_input(BenchmarkId::new("scan300", name), &chain, |b, ch| {
            b.iter(|| find_threshold_scan(ch, black_box(7.3), 300))
        });
    }
    group.finish();
}

fn relative_value_iteration(c: &mut Criterion) {
    let mut group = c.benchmark_group("rvi");
    group.sample_size(10);
    for metric in Metric::ALL {
        let params = scenario(SCENARIO_2, 5.0);
        group.bench_function(metric.as_str(), |b| {
            b.iter(|| rvi_solve(&params, metric, &RviConfig::default()).unwrap().gain)
        });
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate_100k");
    group.sample_size(20);
    let params = scenario(SCENARIO_1, 2.0);
    let config = SimConfig::new(100_000, 1000, 42);
    group.bench_function("aggregate", |b| {
        b.iter(|| simulate_aggregate(&params, Metric::Aoii, AttackPolicy::Threshold(2), &config))
    });
    group.bench_function("full", |b| {
        b.iter(|| simulate_full(&params, Metric::Aoii, AttackPolicy::Threshold(2), &config))
    });
    group.finish();
}

criterion_group!(
    benches,
    closed_form,
    threshold_search,
    relative_value_iteration,
    monte_carlo
);
criterion_main!(benches);
