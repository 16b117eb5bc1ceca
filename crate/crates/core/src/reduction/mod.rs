//! Manifold dimension reduction of document vectors.
//!
//! Builds an exact k-nearest-neighbour graph, turns it into a fuzzy
//! simplicial set (calibrated per-point memberships, symmetrized), then
//! lays the graph out in a few dimensions with negative-sampling SGD.

mod fuzzy;
mod layout;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, euclidean, norm};

pub use fuzzy::{fuzzy_simplicial_set, smooth_knn_calibrate, FuzzyGraph, SMOOTH_KNN_TOLERANCE};
pub use layout::{fit_curve_params, optimize_layout, CurveParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Cosine,
    Euclidean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReductionConfig {
    pub n_neighbors: usize,
    pub n_components: usize,
    pub metric: Metric,
    pub min_dist: f64,
    pub layout_epochs: usize,
    pub negative_sample_rate: usize,
    pub seed: u64,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        ReductionConfig {
            n_neighbors: 15,
            n_components: 5,
            metric: Metric::Cosine,
            min_dist: 0.1,
            layout_epochs: 200,
            negative_sample_rate: 5,
            seed: 0,
        }
    }
}

impl ReductionConfig {
    pub fn validate(&self, points: usize) -> Result<()> {
        if self.n_neighbors < 2 {
            return Err(Error::InvalidConfig("n_neighbors must be at least 2".into()));
        }
        if self.n_neighbors >= points {
            return Err(Error::InvalidConfig(format!(
                "n_neighbors ({}) must be smaller than the number of points ({points})",
                self.n_neighbors
            )));
        }
        if self.n_components == 0 {
            return Err(Error::InvalidConfig("n_components must be at least 1".into()));
        }
        if !(self.min_dist >= 0.0) {
            return Err(Error::InvalidConfig("min_dist must be non-negative".into()));
        }
        Ok(())
    }
}

/// Per-point neighbour lists, nearest first, self excluded.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnGraph {
    pub neighbors: Vec<Vec<(usize, f64)>>,
}

impl KnnGraph {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }
}

/// Exact k nearest neighbours of every row. Cosine distance is
/// `1 - cosine similarity`; ties go to the lower index.
pub fn knn_graph(vectors: ArrayView2<'_, f64>, k: usize, metric: Metric) -> Result<KnnGraph> {
    let n = vectors.nrows();
    if k == 0 || k >= n {
        return Err(Error::InvalidInput(format!("k = {k} needs 1 <= k < {n} points")));
    }
    let rows: Vec<Vec<f64>> = vectors.outer_iter().map(|r| r.to_vec()).collect();
    let rows = match metric {
        Metric::Euclidean => rows,
        Metric::Cosine => rows
            .into_iter()
            .map(|r| {
                let l = norm(&r);
                if l == 0.0 {
                    Err(Error::ZeroVector)
                } else {
                    Ok(r.into_iter().map(|x| x / l).collect())
                }
            })
            .collect::<Result<_>>()?,
    };
    let distance = |a: &[f64], b: &[f64]| match metric {
        Metric::Cosine => (1.0 - dot(a, b)).max(0.0),
        Metric::Euclidean => euclidean(a, b),
    };
    let neighbors = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, distance(&rows[i], &rows[j])))
                .collect();
            let order = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
            d.select_nth_unstable_by(k - 1, order);
            d.truncate(k);
            d.sort_by(order);
            d
        })
        .collect();
    Ok(KnnGraph { neighbors })
}

/// kNN graph, fuzzy simplicial set and layout in one call.
pub fn reduce(vectors: ArrayView2<'_, f64>, config: &ReductionConfig) -> Result<Array2<f64>> {
    config.validate(vectors.nrows())?;
    let knn = knn_graph(vectors, config.n_neighbors, config.metric)?;
    let graph = fuzzy_simplicial_set(&knn);
    optimize_layout(&graph, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn neighbours_ordered_by_distance() {
        // Angles 0, 0.3 and 1.0 rad from the x axis.
        let v = array![[1.0, 0.0], [0.3f64.cos(), 0.3f64.sin()], [1.0f64.cos(), 1.0f64.sin()]];
        let g = knn_graph(v.view(), 2, Metric::Cosine).unwrap();
        assert_eq!(g.neighbors[0].iter().map(|p| p.0).collect::<Vec<_>>(), [1, 2]);
        assert!((g.neighbors[0][0].1 - (1.0 - 0.3f64.cos())).abs() < 1e-12);
    }

    #[test]
    fn full_lists_when_k_is_n_minus_one() {
        let v = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 0.5]];
        let g = knn_graph(v.view(), 3, Metric::Euclidean).unwrap();
        for (i, nb) in g.neighbors.iter().enumerate() {
            let mut idx: Vec<usize> = nb.iter().map(|p| p.0).collect();
            idx.sort();
            assert_eq!(idx, (0..4).filter(|&j| j != i).collect::<Vec<_>>());
        }
        assert!(knn_graph(v.view(), 4, Metric::Euclidean).is_err());
    }

    #[test]
    fn zero_vector_rejected_under_cosine() {
        let v = array![[1.0, 0.0], [0.0, 0.0], [1.0, 1.0]];
        assert!(matches!(knn_graph(v.view(), 1, Metric::Cosine), Err(Error::ZeroVector)));
    }

    #[test]
    fn matches_all_pairs_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = Array2::from_shape_simple_fn((200, 7), || rng.random_range(-1.0..1.0));
        for metric in [Metric::Cosine, Metric::Euclidean] {
            let g = knn_graph(v.view(), 10, metric).unwrap();
            for i in 0..200 {
                // Oracle: full sort of every pair distance computed from scratch.
                let mut all: Vec<(usize, f64)> = (0..200)
                    .filter(|&j| j != i)
                    .map(|j| {
                        let (a, b) = (v.row(i), v.row(j));
                        let d = match metric {
                            Metric::Cosine => 1.0 - a.dot(&b) / (a.dot(&a).sqrt() * b.dot(&b).sqrt()),
                            Metric::Euclidean => (&a - &b).mapv(|x| x * x).sum().sqrt(),
                        };
                        (j, d)
                    })
                    .collect();
                all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
                let got: Vec<usize> = g.neighbors[i].iter().map(|p| p.0).collect();
                let want: Vec<usize> = all[..10].iter().map(|p| p.0).collect();
                assert_eq!(got, want);
                for (g, w) in g.neighbors[i].iter().zip(&all) {
                    assert!((g.1 - w.1).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn config_validation() {
        let c = ReductionConfig::default();
        assert!(c.validate(16).is_ok());
        assert!(c.validate(15).is_err());
        assert!(ReductionConfig { n_neighbors: 1, ..c.clone() }.validate(100).is_err());
        assert!(ReductionConfig { n_components: 0, ..c }.validate(100).is_err());
    }
}
