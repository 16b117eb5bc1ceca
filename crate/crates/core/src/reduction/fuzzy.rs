use std::collections::BTreeMap;

use super::KnnGraph;

/// Residual bound on the calibrated membership sum.
pub const SMOOTH_KNN_TOLERANCE: f64 = 1e-5;
const MAX_ITERATIONS: usize = 64;

/// Finds `rho` (smallest positive neighbour distance) and the bandwidth
/// `sigma` for which `sum_j exp(-max(0, d_j - rho) / sigma) = log2(k)`.
///
/// When no bandwidth can reach the target (more distances tie with `rho`
/// than the target, as with `k = 1`), `sigma` falls back to `1000 * max distance` (or 1.0 if all
/// distances are zero).
pub fn smooth_knn_calibrate(distances: &[f64]) -> (f64, f64) {
    let k = distances.len();
    assert!(k > 0, "calibration needs at least one neighbour");
    let rho = distances
        .iter()
        .copied()
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let rho = if rho.is_finite() { rho } else { 0.0 };
    let max_d = distances.iter().copied().fold(0.0, f64::max);
    let sentinel = if max_d > 0.0 { max_d * 1e3 } else { 1.0 };

    let target = (k as f64).log2();
    // As sigma -> 0 only the distances tied with rho contribute.
    let floor = distances.iter().filter(|&&d| d <= rho).count() as f64;
    if floor > target {
        return (rho, sentinel);
    }

    let membership_sum = |sigma: f64| -> f64 {
        distances
            .iter()
            .map(|&d| (-(d - rho).max(0.0) / sigma).exp())
            .sum()
    };

    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    let mut sigma = 1.0;
    for _ in 0..MAX_ITERATIONS {
        let s = membership_sum(sigma);
        if (s - target).abs() < SMOOTH_KNN_TOLERANCE * 0.1 {
            break;
        }
        // The sum increases with sigma.
        if s > target {
            hi = sigma;
            sigma = (lo + hi) / 2.0;
        } else {
            lo = sigma;
            sigma = if hi.is_infinite() { sigma * 2.0 } else { (lo + hi) / 2.0 };
        }
    }
    (rho, sigma)
}

/// Symmetric fuzzy graph over the points of a kNN graph.
#[derive(Clone, Debug, PartialEq)]
pub struct FuzzyGraph {
    n_points: usize,
    /// Undirected edges `(i, j, w)` with `i < j`, sorted, `w` in `(0, 1]`.
    edges: Vec<(usize, usize, f64)>,
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl FuzzyGraph {
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Membership strength between `i` and `j` (0 when not connected).
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let key = (i.min(j), i.max(j));
        self.edges
            .binary_search_by(|e| (e.0, e.1).cmp(&key))
            .map(|p| self.edges[p].2)
            .unwrap_or(0.0)
    }
}

/// Probabilistic t-conorm used to symmetrize directed memberships.
#[inline]
pub(crate) fn fuzzy_union(a: f64, b: f64) -> f64 {
    (a + b - a * b).min(1.0)
}

/// Directed memberships `exp(-max(0, d_ij - rho_i) / sigma_i)`, merged
/// into one undirected weight per pair with `a + b - ab`.
pub fn fuzzy_simplicial_set(knn: &KnnGraph) -> FuzzyGraph {
    let mut rho = Vec::with_capacity(knn.len());
    let mut sigma = Vec::with_capacity(knn.len());
    let mut directed: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for (i, nb) in knn.neighbors.iter().enumerate() {
        let dists: Vec<f64> = nb.iter().map(|p| p.1).collect();
        let (r, s) = smooth_knn_calibrate(&dists);
        rho.push(r);
        sigma.push(s);
        for &(j, d) in nb {
            let w = (-(d - r).max(0.0) / s).exp();
            let entry = directed.entry((i.min(j), i.max(j))).or_insert((0.0, 0.0));
            if i < j {
                entry.0 = w;
            } else {
                entry.1 = w;
            }
        }
    }
    let edges = directed
        .into_iter()
        .map(|((i, j), (a, b))| (i, j, fuzzy_union(a, b)))
        .filter(|e| e.2 > 0.0)
        .collect();
    FuzzyGraph {
        n_points: knn.len(),
        edges,
        rho,
        sigma,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::{knn_graph, Metric};
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn residual(d: &[f64], rho: f64, sigma: f64) -> f64 {
        let s: f64 = d.iter().map(|&x| (-(x - rho).max(0.0) / sigma).exp()).sum();
        (s - (d.len() as f64).log2()).abs()
    }

    #[test]
    fn analytic_three_neighbours() {
        // x + x^2 = log2(3) - 1 with x = exp(-1/sigma).
        let (rho, sigma) = smooth_knn_calibrate(&[1.0, 2.0, 3.0]);
        assert_eq!(rho, 1.0);
        let t = 3f64.log2() - 1.0;
        let x = (-1.0 + (1.0 + 4.0 * t).sqrt()) / 2.0;
        assert!((sigma - (-1.0 / x.ln())).abs() < 1e-5);
        assert!((sigma - 1.1334).abs() < 1e-3);
    }

    #[test]
    fn degenerate_inputs_use_sentinel() {
        assert_eq!(smooth_knn_calibrate(&[0.7]), (0.7, 700.0));
        assert_eq!(smooth_knn_calibrate(&[2.0, 2.0, 2.0, 2.0]), (2.0, 2000.0));
        assert_eq!(smooth_knn_calibrate(&[0.0, 0.0]), (0.0, 1.0));
        // One tie with rho already meets log2(2) = 1 as sigma shrinks.
        let (rho, sigma) = smooth_knn_calibrate(&[0.5, 3.0]);
        assert!(residual(&[0.5, 3.0], rho, sigma) < SMOOTH_KNN_TOLERANCE);
    }

    #[test]
    fn t_conorm() {
        assert_eq!(fuzzy_union(1.0, 0.0), 1.0);
        assert!((fuzzy_union(0.6, 0.5) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn nearest_neighbour_gets_full_membership() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let v = Array2::from_shape_simple_fn((40, 3), || rng.random_range(-1.0..1.0));
        let knn = knn_graph(v.view(), 5, Metric::Euclidean).unwrap();
        let g = fuzzy_simplicial_set(&knn);
        for (i, nb) in knn.neighbors.iter().enumerate() {
            assert!((g.weight(i, nb[0].0) - 1.0).abs() < 1e-12);
        }
        for &(i, j, w) in g.edges() {
            assert!(i < j && w > 0.0 && w <= 1.0);
            assert_eq!(g.weight(i, j), g.weight(j, i));
        }
    }

    proptest! {
        #[test]
        fn calibration_hits_target(mut d in proptest::collection::vec(0.0f64..10.0, 2..40)) {
            d.sort_by(f64::total_cmp);
            let rho = d.iter().copied().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);
            let ties = d.iter().filter(|&&x| x <= rho).count() as f64;
            prop_assume!(rho.is_finite() && ties <= (d.len() as f64).log2());
            let (r, s) = smooth_knn_calibrate(&d);
            prop_assert_eq!(r, rho);
            prop_assert!(residual(&d, r, s) < SMOOTH_KNN_TOLERANCE);
        }
    }
}
