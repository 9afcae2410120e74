use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cnvks_bench::dataset;
use cnvks_core::{
    monte_carlo_null, permutation_null, Aggregator, Bandwidth, KernelShape, KernelSpec,
    Permutations, TransformKind, TransformSpec,
};

const DRAWS: usize = 100;

fn permutation(c: &mut Criterion) {
    let kernel = KernelSpec::new(KernelShape::Flat, Bandwidth::Markers(30));
    let transform = TransformSpec::new(TransformKind::Z, true);
    let mut group = c.benchmark_group("permutation_null");
    group.sample_size(10);
    for (n, markers) in [(200, 200), (1_000, 200), (200, 2_000)] {
        let data = dataset(n, markers);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{n}x{markers}")),
            &data,
            |b, d| {
                b.iter(|| {
                    permutation_null(
                        black_box(&d.track),
                        &d.phen,
                        kernel,
                        transform,
                        Permutations::Random(DRAWS),
                        1,
                    )
                    .unwrap()
                })
            },
        );
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let transform = TransformSpec::new(TransformKind::Z, true);
    let data = dataset(10, 2_000);
    let aggregator = Aggregator::new(
        data.track.positions(),
        KernelSpec::new(KernelShape::Flat, Bandwidth::Markers(30)),
    )
    .unwrap();
    let mut group = c.benchmark_group("monte_carlo_null");
    group.sample_size(10);
    group.bench_function("2000_markers", |b| {
        b.iter(|| monte_carlo_null(black_box(&aggregator), transform, DRAWS, 1).unwrap())
    });
    group.finish();
}

criterion_group!(benches, permutation, monte_carlo);
criterion_main!(benches);
