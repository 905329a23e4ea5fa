use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use cirprof::esprit::{esprit_delays, EspritConfig};
use cirprof::estimator::{estimate_initial, refine, track, Level};
use cirprof::initializer::peak_pick_init;
use cirprof::model_order::{hosvd_singular_values, OrderScenario};
use cirprof::profiler::reconstruct;
use cirprof_bench::Fixture;

fn kernels(c: &mut Criterion) {
    let fx = Fixture::new(30, 7);
    let p = fx.pipeline();
    let cfg = p.cfg();
    let rec = fx.with_order(3);
    let target = p.truth_profile(rec);

    c.bench_function("reconstruct_l3", |b| {
        b.iter(|| reconstruct(black_box(&rec.theta), cfg, &p.q, &p.bank).unwrap())
    });
    c.bench_function("peak_pick_init_l3", |b| {
        b.iter(|| peak_pick_init(black_box(&target), 3, cfg).unwrap())
    });
    c.bench_function("refine_fine_l3", |b| {
        b.iter(|| refine(black_box(&rec.theta), &target, Level::Fine, cfg, &p.q, &p.bank, &p.schedule).unwrap())
    });
    let (_, drifted) = p.drifted(rec, 0);
    c.bench_function("track_l3", |b| {
        b.iter(|| track(black_box(&rec.theta), &drifted, cfg, &p.q, &p.bank, &p.schedule).unwrap())
    });

    let h = p.observed_freq_response(rec, 0);
    let ecfg = EspritConfig { subarray_length: None, use_forward_backward: true, model_order: 3 };
    c.bench_function("esprit_delays_l3", |b| b.iter(|| esprit_delays(black_box(&h), &ecfg, cfg).unwrap()));

    let tensor = OrderScenario::default().tensor(&rec.theta, 0, cfg).unwrap();
    c.bench_function("hosvd_singular_values", |b| {
        b.iter(|| hosvd_singular_values(black_box(&tensor)).unwrap())
    });
}

fn start_search(c: &mut Criterion) {
    let fx = Fixture::new(30, 7);
    let p = fx.pipeline();
    let rec = fx.with_order(2);
    let target = p.truth_profile(rec);
    let mut g = c.benchmark_group("start");
    g.sample_size(10);
    g.bench_function("estimate_initial_l2", |b| {
        b.iter(|| estimate_initial(black_box(&target), 2, p.cfg(), &p.q, &p.bank, &p.schedule).unwrap())
    });
    g.finish();
}

criterion_group!(benches, kernels, start_search);
criterion_main!(benches);
