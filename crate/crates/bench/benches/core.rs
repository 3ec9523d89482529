use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use povmsim_core::generators::{haar_isometry, haar_random_povm, ic_covariant_povm, DEFAULT_IC_ALPHA};
use povmsim_core::partitions::{best_of_random, greedy_improve, standard_partition};
use povmsim_core::sampling::sample_scheme;
use povmsim_core::scheme::{build_scheme, success_probability};
use povmsim_core::{QuantumState, Seed};

fn generators(c: &mut Criterion) {
    let mut g = c.benchmark_group("haar_isometry");
    for d in [4usize, 8, 16] {
        g.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, &d| {
            b.iter(|| haar_isometry(d, d * d, Seed(1)).unwrap())
        });
    }
    g.finish();
}

fn success(c: &mut Criterion) {
    let mut g = c.benchmark_group("success_probability");
    for d in [4usize, 8, 16] {
        let target = haar_random_povm(d, d * d, Seed(2)).unwrap();
        let part = standard_partition(d * d, d).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, _| {
            b.iter(|| success_probability(black_box(&target), &part).unwrap())
        });
    }
    g.finish();
}

fn scheme(c: &mut Criterion) {
    let target = ic_covariant_povm(8, DEFAULT_IC_ALPHA).unwrap();
    let part = standard_partition(64, 8).unwrap();
    c.bench_function("build_scheme/ic8", |b| b.iter(|| build_scheme(black_box(&target), &part).unwrap()));
}

fn sampling(c: &mut Criterion) {
    let target = haar_random_povm(4, 16, Seed(3)).unwrap();
    let scheme = build_scheme(&target, &standard_partition(16, 4).unwrap()).unwrap();
    let state = QuantumState::maximally_mixed(4);
    c.bench_function("sample_scheme/d4_1e5", |b| b.iter(|| sample_scheme(&scheme, &state, 100_000, Seed(4)).unwrap()));
}

fn search(c: &mut Criterion) {
    let target = haar_random_povm(8, 64, Seed(5)).unwrap();
    let start = standard_partition(64, 8).unwrap();
    let mut g = c.benchmark_group("partition_search");
    g.sample_size(10);
    g.bench_function("best_of_random/24", |b| b.iter(|| best_of_random(&target, 8, 24, Seed(6)).unwrap()));
    g.bench_function("greedy/2_passes", |b| b.iter(|| greedy_improve(&target, &start, 2, Seed(7)).unwrap()));
    g.finish();
}

criterion_group!(benches, generators, success, scheme, sampling, search);
criterion_main!(benches);
