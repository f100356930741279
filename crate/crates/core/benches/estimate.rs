use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use minnorm_core::exec::{is_parallel, map_indices, map_indices_sequential};
use minnorm_core::pipeline::{estimate_point, Orientation};
use minnorm_core::spatial::KdTree;
use minnorm_core::{EstimatorSpec, ImplicitSurface, Method};

fn parallel_vs_sequential(c: &mut Criterion) {
    let cloud = ImplicitSurface::ellipsoid(0.85, 0.35, 0.5).unwrap().halton_sample(1000).unwrap();
    let tree = KdTree::new(&cloud.points);
    let orientation = Orientation::for_cloud(&cloud);
    let mut group = c.benchmark_group(format!("estimate_1000_points(parallel feature: {})", is_parallel()));
    group.sample_size(10);
    for method in [Method::Rbf, Method::Krbf] {
        let spec = EstimatorSpec::new(method, 4, 40);
        let point = |i| estimate_point(&cloud.points, &tree, i, &spec, &orientation);
        group.bench_function(BenchmarkId::new("sequential", method), |b| {
            b.iter(|| black_box(map_indices_sequential(cloud.len(), point)))
        });
        group.bench_function(BenchmarkId::new("parallel", method), |b| {
            b.iter(|| black_box(map_indices(cloud.len(), point)))
        });
    }
    group.finish();
}

criterion_group!(benches, parallel_vs_sequential);
criterion_main!(benches);
