//! Density-based clustering of the reduced document vectors.
//!
//! Core distances and mutual reachability turn the points into a weighted
//! complete graph; its minimum spanning tree gives the single-linkage
//! hierarchy, which is condensed by minimum cluster size and cut with the
//! excess-of-mass rule. Points outside every selected cluster are noise.

mod condense;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::euclidean;

pub use condense::{condense_tree, extract_clusters, CondensedCluster, CondensedTree};

/// Label given to points that belong to no cluster.
pub const NOISE: i32 = -1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub min_cluster_size: usize,
    /// Neighbour rank used for core distances; `None` uses
    /// `min_cluster_size`.
    pub min_samples: Option<usize>,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            min_cluster_size: 15,
            min_samples: None,
        }
    }
}

impl ClusterConfig {
    pub fn min_samples(&self) -> usize {
        self.min_samples.unwrap_or(self.min_cluster_size)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_cluster_size < 2 {
            return Err(Error::InvalidConfig("min_cluster_size must be at least 2".into()));
        }
        if self.min_samples() < 1 {
            return Err(Error::InvalidConfig("min_samples must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLabeling {
    /// Per point: cluster in `0..cluster_count`, or [`NOISE`].
    pub labels: Vec<i32>,
    pub cluster_count: usize,
}

impl ClusterLabeling {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.cluster_count];
        for &l in &self.labels {
            if l >= 0 {
                sizes[l as usize] += 1;
            }
        }
        sizes
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == cluster as i32)
            .collect()
    }

    /// Checks labels are in range and every cluster is non-empty.
    pub fn validate(&self) -> Result<()> {
        if self.labels.iter().any(|&l| l < NOISE || l >= self.cluster_count as i32) {
            return Err(Error::InvalidInput("cluster label out of range".into()));
        }
        if self.sizes().contains(&0) {
            return Err(Error::InvalidInput("empty cluster in labeling".into()));
        }
        Ok(())
    }
}

/// Euclidean distance from each point to its `min_samples`-th nearest
/// neighbour, not counting itself.
pub fn core_distances(points: ArrayView2<'_, f64>, min_samples: usize) -> Result<Vec<f64>> {
    let n = points.nrows();
    if min_samples == 0 || min_samples >= n {
        return Err(Error::InvalidInput(format!(
            "core distances need 1 <= min_samples < points, got min_samples {min_samples} for {n} points"
        )));
    }
    let rows: Vec<Vec<f64>> = points.outer_iter().map(|r| r.to_vec()).collect();
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| euclidean(&rows[i], &rows[j]))
                .collect();
            let (_, kth, _) = d.select_nth_unstable_by(min_samples - 1, f64::total_cmp);
            *kth
        })
        .collect())
}

/// `max(core(a), core(b), |a - b|)` over a point set.
pub struct MutualReachability<'a> {
    data: &'a [f64],
    dim: usize,
    core: &'a [f64],
}

impl<'a> MutualReachability<'a> {
    pub fn new(points: ArrayView2<'a, f64>, core: &'a [f64]) -> Self {
        assert_eq!(points.nrows(), core.len());
        let dim = points.ncols();
        let data = points.to_slice().expect("points must be row-major");
        MutualReachability { data, dim, core }
    }

    pub fn len(&self) -> usize {
        self.core.len()
    }

    pub fn is_empty(&self) -> bool {
        self.core.is_empty()
    }

    fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        mutual_reachability(euclidean(self.row(a), self.row(b)), self.core[a], self.core[b])
    }
}

#[inline]
pub fn mutual_reachability(distance: f64, core_a: f64, core_b: f64) -> f64 {
    distance.max(core_a).max(core_b)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Dense Prim's minimum spanning tree over `n` points, starting at point
/// 0. Among equally distant candidates the lower index joins first and
/// keeps its earliest parent.
pub fn build_mst(n: usize, distance: impl Fn(usize, usize) -> f64) -> Vec<MstEdge> {
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_d = f64::INFINITY;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let d = distance(current, j);
            if d < best[j] {
                best[j] = d;
                parent[j] = current;
            }
            if next == usize::MAX || best[j] < next_d {
                next = j;
                next_d = best[j];
            }
        }
        in_tree[next] = true;
        edges.push(MstEdge {
            a: parent[next],
            b: next,
            weight: next_d,
        });
        current = next;
    }
    edges
}

/// Full clustering: core distances, mutual-reachability MST, condensed
/// tree, excess-of-mass selection.
pub fn cluster(points: ArrayView2<'_, f64>, config: &ClusterConfig) -> Result<ClusterLabeling> {
    config.validate()?;
    let n = points.nrows();
    if n <= config.min_cluster_size {
        return Err(Error::InvalidInput(format!(
            "clustering needs more than min_cluster_size ({}) points, got {n}",
            config.min_cluster_size
        )));
    }
    let points = points.as_standard_layout();
    let core = core_distances(points.view(), config.min_samples().min(n - 1))?;
    let mr = MutualReachability::new(points.view(), &core);
    let mst = build_mst(n, |a, b| mr.distance(a, b));
    let tree = condense_tree(&mst, n, config.min_cluster_size);
    Ok(extract_clusters(&tree))
}
