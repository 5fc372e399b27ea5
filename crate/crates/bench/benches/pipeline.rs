use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use emocov_bench::{lexicon_case, random_matrix};
use emocov_core::clustering::agglomerate;
use emocov_core::evaluation::coverage;
use emocov_core::linalg::ridge_fit;
use emocov_core::reduction::{knn_graph, Metric};
use emocov_core::Linkage;

fn knn(c: &mut Criterion) {
    let mut group = c.benchmark_group("knn_graph");
    for n in [250, 1000] {
        let data = random_matrix(n, 50, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &data, |b, data| {
            b.iter(|| knn_graph(data, 15, Metric::CosineDistance).unwrap())
        });
    }
    group.finish();
}

fn agglomerative(c: &mut Criterion) {
    let mut group = c.benchmark_group("agglomerate");
    group.sample_size(10);
    let coords = random_matrix(600, 2, 2);
    for linkage in [Linkage::Centroid, Linkage::Ward, Linkage::Average] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{linkage:?}")), &linkage, |b, &linkage| {
            b.iter(|| agglomerate(&coords, linkage).unwrap())
        });
    }
    group.finish();
}

fn coverage_report(c: &mut Criterion) {
    let (lexicon, concepts, model) = lexicon_case(20, "hicem25");
    c.bench_function("coverage/hicem25", |b| b.iter(|| coverage(&model, &concepts, &lexicon).unwrap()));
}

fn ridge(c: &mut Criterion) {
    let x = random_matrix(2000, 25, 3);
    let y = random_matrix(2000, 300, 4);
    c.bench_function("ridge_fit/2000x25", |b| b.iter(|| ridge_fit(&x, &y, 1.0).unwrap()));
}

criterion_group!(benches, knn, agglomerative, coverage_report, ridge);
criterion_main!(benches);
