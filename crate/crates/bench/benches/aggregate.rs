use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cnvks_bench::dataset;
use cnvks_core::{
    aggregate, run_marker_tests, Aggregator, Bandwidth, KernelShape, KernelSpec, TransformKind,
    TransformSpec,
};

fn marker_tests(c: &mut Criterion) {
    let mut group = c.benchmark_group("marker_tests");
    for markers in [1_000, 10_000] {
        let data = dataset(500, markers);
        group.bench_with_input(BenchmarkId::from_parameter(markers), &data, |b, d| {
            b.iter(|| run_marker_tests(black_box(&d.track), black_box(&d.phen)).unwrap())
        });
    }
    group.finish();
}

fn aggregation(c: &mut Criterion) {
    let data = dataset(200, 10_000);
    let tests = run_marker_tests(&data.track, &data.phen).unwrap();
    let positions = data.track.positions();
    let transform = TransformSpec::new(TransformKind::Z, true);
    let mut group = c.benchmark_group("aggregate");
    for k in [10, 50, 200] {
        for shape in [KernelShape::Flat, KernelShape::Epanechnikov] {
            let kernel = KernelSpec::new(shape, Bandwidth::Markers(k));
            group.bench_function(BenchmarkId::new(shape.to_string(), k), |b| {
                b.iter(|| aggregate(black_box(&tests), positions, kernel, transform).unwrap())
            });
        }
    }
    group.finish();
}

fn aggregator_build(c: &mut Criterion) {
    let data = dataset(50, 100_000);
    let positions = data.track.positions();
    let mut group = c.benchmark_group("aggregator_build");
    for (label, bandwidth) in [
        ("markers_30", Bandwidth::Markers(30)),
        ("width_20kb", Bandwidth::Width(20_000.0)),
    ] {
        let kernel = KernelSpec::new(KernelShape::Flat, bandwidth);
        group.bench_function(label, |b| {
            b.iter(|| Aggregator::new(black_box(positions), kernel).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, marker_tests, aggregation, aggregator_build);
criterion_main!(benches);
