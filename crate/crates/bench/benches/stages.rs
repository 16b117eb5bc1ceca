use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use top2vec_bench::{blobs, random_points, themed_docs};
use top2vec_core::clustering::{cluster, ClusterConfig};
use top2vec_core::embedding::{train, EmbeddingConfig};
use top2vec_core::metric::{build_stats, evaluate, TopicSpec};
use top2vec_core::reduction::{fuzzy_simplicial_set, knn_graph, reduce, smooth_knn_calibrate, Metric, ReductionConfig};
use top2vec_core::{run_pipeline, PipelineConfig, SemanticEmbedding};

fn embedding_steps(c: &mut Criterion) {
    let docs = themed_docs(200, 1);
    let config = EmbeddingConfig {
        vector_size: 50,
        epochs: 1,
        ..Default::default()
    };
    let model = train(&docs, &config).unwrap();
    let mut g = c.benchmark_group("embedding");
    g.bench_function("dbow_step", |b| {
        let mut m: SemanticEmbedding = model.clone();
        b.iter(|| m.train_step_dbow(black_box(3), black_box(7), 0.01))
    });
    g.bench_function("skipgram_step", |b| {
        let mut m = model.clone();
        b.iter(|| m.train_step_skipgram(black_box(5), black_box(11), 0.01))
    });
    g.sample_size(10);
    g.bench_function("train_200_docs_5_epochs", |b| {
        let config = EmbeddingConfig {
            vector_size: 50,
            epochs: 5,
            ..Default::default()
        };
        b.iter(|| train(black_box(&docs), &config).unwrap())
    });
    g.finish();
}

fn reduction(c: &mut Criterion) {
    let mut g = c.benchmark_group("reduction");
    for n in [500, 1000] {
        let pts = random_points(n, 50, 2);
        g.bench_with_input(BenchmarkId::new("knn_graph", n), &pts, |b, p| {
            b.iter(|| knn_graph(p.view(), 15, Metric::Cosine).unwrap())
        });
    }
    let distances: Vec<f64> = (1..=15).map(|i| i as f64 * 0.07).collect();
    g.bench_function("smooth_knn_calibrate", |b| b.iter(|| smooth_knn_calibrate(black_box(&distances))));
    let knn = knn_graph(random_points(1000, 50, 3).view(), 15, Metric::Cosine).unwrap();
    g.bench_function("fuzzy_simplicial_set_1000", |b| b.iter(|| fuzzy_simplicial_set(&knn)));
    g.sample_size(10);
    let pts = random_points(1000, 50, 4);
    g.bench_function("reduce_1000", |b| b.iter(|| reduce(pts.view(), &ReductionConfig::default()).unwrap()));
    g.finish();
}

fn clustering(c: &mut Criterion) {
    let mut g = c.benchmark_group("clustering");
    g.sample_size(10);
    for per_blob in [100, 200] {
        let pts = blobs(5, per_blob, 5, 5);
        g.bench_with_input(BenchmarkId::new("cluster", pts.nrows()), &pts, |b, p| {
            b.iter(|| cluster(p.view(), &ClusterConfig::default()).unwrap())
        });
    }
    g.finish();
}

fn end_to_end(c: &mut Criterion) {
    let docs = themed_docs(1000, 6);
    let mut config = PipelineConfig::default();
    config.embedding.vector_size = 50;
    let out = run_pipeline(&docs, &config).unwrap();
    let archive = &out.archive;
    let vocab = archive.embedding.vocabulary();
    let stats = build_stats(&docs, vocab).unwrap();
    let spec = TopicSpec::from_model(&archive.topics, &stats, vocab).unwrap();

    let mut g = c.benchmark_group("end_to_end");
    g.sample_size(10);
    g.bench_function("pwi_1000_docs", |b| b.iter(|| evaluate(&spec, &stats, 10).unwrap()));
    g.bench_function("build_stats_1000_docs", |b| b.iter(|| build_stats(&docs, vocab).unwrap()));
    g.bench_function("archive_round_trip", |b| {
        b.iter(|| top2vec_core::ModelArchive::from_bytes(&archive.to_bytes().unwrap()).unwrap())
    });
    g.bench_function("pipeline_1000_docs", |b| b.iter(|| run_pipeline(&docs, &config).unwrap()));
    g.finish();
}

criterion_group!(benches, embedding_steps, reduction, clustering, end_to_end);
criterion_main!(benches);
