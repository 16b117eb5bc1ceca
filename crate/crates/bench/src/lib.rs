//! Shared inputs for the benchmarks.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use top2vec_core::synthetic::ThemedCorpus;
use top2vec_core::Document;

/// Uniform random points in `[-1, 1)^dim`.
pub fn random_points(n: usize, dim: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((n, dim), || rng.random_range(-1.0..1.0))
}

/// `centers` Gaussian-ish blobs of `per_blob` points in `dim` dimensions.
pub fn blobs(centers: usize, per_blob: usize, dim: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<Vec<f64>> = (0..centers)
        .map(|_| (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect())
        .collect();
    Array2::from_shape_fn((centers * per_blob, dim), |(i, j)| {
        c[i / per_blob][j] + rng.random_range(-1.0..1.0) + rng.random_range(-1.0..1.0)
    })
}

/// The themed corpus used by the desk-scale checks.
pub fn themed_docs(n_docs: usize, seed: u64) -> Vec<Document> {
    ThemedCorpus::new(5, 40, 60).documents(n_docs, 60, seed)
}
