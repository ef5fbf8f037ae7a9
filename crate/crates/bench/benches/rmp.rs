use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rmp_bench::Fixtures;
use rmp_core::channel::channel_robustness;
use rmp_core::discrimination::histogram_sample;
use rmp_core::state_rmp::{extract_witness, robustness};
use rmp_core::Settings;

fn state_programs(c: &mut Criterion) {
    let f = Fixtures::load();
    let s = Settings::default();
    c.bench_function("robustness/w", |b| b.iter(|| robustness(black_box(&f.w), &s).unwrap()));
    c.bench_function("robustness/monogamy", |b| {
        b.iter(|| robustness(black_box(&f.monogamy), &s).unwrap())
    });
    c.bench_function("witness/w", |b| {
        b.iter(|| extract_witness(black_box(&f.w), &s).unwrap())
    });
}

fn discrimination(c: &mut Criterion) {
    let s = Settings::default();
    let mut i = 0u64;
    c.bench_function("histogram/sample", |b| {
        b.iter(|| {
            i += 1;
            histogram_sample(2024, black_box(i), &s).unwrap()
        })
    });
}

fn channels(c: &mut Criterion) {
    let f = Fixtures::load();
    let s = Settings::default();
    c.bench_function("channel_robustness/broadcasting", |b| {
        b.iter(|| channel_robustness(black_box(&f.broadcasting), &s).unwrap())
    });
}

criterion_group!(benches, state_programs, discrimination, channels);
criterion_main!(benches);
