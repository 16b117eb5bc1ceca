//! Condensed cluster hierarchy and excess-of-mass cluster selection.

use serde::{Deserialize, Serialize};

use super::{ClusterLabeling, MstEdge, NOISE};

/// Distances below this are clamped before inverting into lambdas.
const MIN_DISTANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CondensedCluster {
    pub parent: Option<usize>,
    /// `1 / distance` at which the cluster appears (0 for the root).
    pub birth_lambda: f64,
    /// Points in the cluster when it appears.
    pub size: usize,
    pub children: Vec<usize>,
    /// Points that left this cluster without forming a child cluster, with
    /// the lambda at which they left.
    pub fallen: Vec<(usize, f64)>,
    /// `sum over points of (lambda_leave - birth_lambda)`.
    pub stability: f64,
}

/// Clusters in creation order; index 0 is the root and every child has a
/// larger index than its parent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CondensedTree {
    pub clusters: Vec<CondensedCluster>,
    pub n_points: usize,
    pub min_cluster_size: usize,
}

struct Dendrogram {
    n: usize,
    /// For merge node `n + i`: (left, right, distance, size).
    merges: Vec<(usize, usize, f64, usize)>,
}

impl Dendrogram {
    fn from_mst(mst: &[MstEdge], n: usize) -> Self {
        let mut edges = mst.to_vec();
        edges.sort_by(|x, y| {
            x.weight
                .total_cmp(&y.weight)
                .then(x.a.min(x.b).cmp(&y.a.min(y.b)))
                .then(x.a.max(x.b).cmp(&y.a.max(y.b)))
        });
        // Union-find over points; `node_of[root]` is the dendrogram node
        // currently representing that component.
        let mut uf: Vec<usize> = (0..n).collect();
        let mut node_of: Vec<usize> = (0..n).collect();
        let mut size = vec![1usize; n];
        fn find(uf: &mut [usize], mut x: usize) -> usize {
            while uf[x] != x {
                uf[x] = uf[uf[x]];
                x = uf[x];
            }
            x
        }
        let mut merges = Vec::with_capacity(n.saturating_sub(1));
        for e in edges {
            let (ra, rb) = (find(&mut uf, e.a), find(&mut uf, e.b));
            if ra == rb {
                continue;
            }
            let merged = size[ra] + size[rb];
            merges.push((node_of[ra], node_of[rb], e.weight, merged));
            uf[rb] = ra;
            size[ra] = merged;
            node_of[ra] = n + merges.len() - 1;
        }
        Dendrogram { n, merges }
    }

    fn size(&self, node: usize) -> usize {
        if node < self.n {
            1
        } else {
            self.merges[node - self.n].3
        }
    }

    fn leaves(&self, node: usize, out: &mut Vec<usize>) {
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if x < self.n {
                out.push(x);
            } else {
                let (l, r, _, _) = self.merges[x - self.n];
                stack.push(r);
                stack.push(l);
            }
        }
    }
}

/// Builds the single-linkage dendrogram from the MST (edges taken in
/// ascending weight) and condenses it: a split where both sides have at
/// least `min_cluster_size` points creates two child clusters, otherwise
/// the small side's points fall out of the current cluster.
pub fn condense_tree(mst: &[MstEdge], n_points: usize, min_cluster_size: usize) -> CondensedTree {
    let dendro = Dendrogram::from_mst(mst, n_points);
    let mut clusters = vec![CondensedCluster {
        parent: None,
        birth_lambda: 0.0,
        size: n_points,
        children: Vec::new(),
        fallen: Vec::new(),
        stability: 0.0,
    }];
    if dendro.merges.len() + 1 != n_points {
        // Disconnected or single point: everything stays in the root.
        clusters[0].fallen = (0..n_points).map(|p| (p, 0.0)).collect();
        return CondensedTree {
            clusters,
            n_points,
            min_cluster_size,
        };
    }

    let root_node = 2 * n_points - 2;
    let mut leaves = Vec::new();
    let mut work = vec![(root_node, 0usize)];
    while let Some((mut node, cluster)) = work.pop() {
        loop {
            if node < n_points {
                // Only reachable when the root itself is a single point.
                let birth = clusters[cluster].birth_lambda;
                clusters[cluster].fallen.push((node, birth));
                break;
            }
            let (left, right, dist, _) = dendro.merges[node - n_points];
            let lambda = 1.0 / dist.max(MIN_DISTANCE);
            let (sl, sr) = (dendro.size(left), dendro.size(right));
            let big_left = sl >= min_cluster_size;
            let big_right = sr >= min_cluster_size;
            if big_left && big_right {
                for (child, size) in [(left, sl), (right, sr)] {
                    let id = clusters.len();
                    clusters.push(CondensedCluster {
                        parent: Some(cluster),
                        birth_lambda: lambda,
                        size,
                        children: Vec::new(),
                        fallen: Vec::new(),
                        stability: 0.0,
                    });
                    clusters[cluster].children.push(id);
                    work.push((child, id));
                }
                break;
            }
            for (side, big) in [(left, big_left), (right, big_right)] {
                if !big {
                    leaves.clear();
                    dendro.leaves(side, &mut leaves);
                    clusters[cluster].fallen.extend(leaves.iter().map(|&p| (p, lambda)));
                }
            }
            match (big_left, big_right) {
                (true, false) => node = left,
                (false, true) => node = right,
                _ => break,
            }
        }
    }
    // Work items are popped in LIFO order; keep the "children after
    // parents" numbering by construction and fix up stabilities now.
    for c in 0..clusters.len() {
        let birth = clusters[c].birth_lambda;
        let fallen: f64 = clusters[c].fallen.iter().map(|&(_, l)| l - birth).sum();
        let split: f64 = clusters[c]
            .children
            .iter()
            .map(|&ch| (clusters[ch].birth_lambda - birth) * clusters[ch].size as f64)
            .sum();
        clusters[c].stability = fallen + split;
    }
    CondensedTree {
        clusters,
        n_points,
        min_cluster_size,
    }
}

impl CondensedTree {
    /// All points in the subtree rooted at `cluster`.
    pub fn points_under(&self, cluster: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![cluster];
        while let Some(c) = stack.pop() {
            out.extend(self.clusters[c].fallen.iter().map(|p| p.0));
            stack.extend(&self.clusters[c].children);
        }
        out.sort_unstable();
        out
    }

    /// Excess-of-mass selection: a non-root cluster is kept when its
    /// stability is at least the summed stability of the best selection
    /// among its descendants.
    pub fn select_clusters(&self) -> Vec<usize> {
        let m = self.clusters.len();
        let mut best = vec![0.0; m];
        let mut keep_self = vec![false; m];
        for c in (1..m).rev() {
            let below: f64 = self.clusters[c].children.iter().map(|&ch| best[ch]).sum();
            let own = self.clusters[c].stability;
            if self.clusters[c].children.is_empty() || own >= below {
                keep_self[c] = true;
                best[c] = own;
            } else {
                best[c] = below;
            }
        }
        let mut selected = Vec::new();
        let mut stack: Vec<usize> = self.clusters[0].children.clone();
        while let Some(c) = stack.pop() {
            if keep_self[c] {
                selected.push(c);
            } else {
                stack.extend(&self.clusters[c].children);
            }
        }
        selected.sort_unstable();
        selected
    }
}

/// Labels every point of each selected cluster's subtree with that
/// cluster's rank; everything else is noise. If nothing below the root is
/// selected, all points form a single cluster 0.
pub fn extract_clusters(tree: &CondensedTree) -> ClusterLabeling {
    let selected = tree.select_clusters();
    if selected.is_empty() {
        return ClusterLabeling {
            labels: vec![0; tree.n_points],
            cluster_count: usize::from(tree.n_points > 0),
        };
    }
    let mut labels = vec![NOISE; tree.n_points];
    for (label, &c) in selected.iter().enumerate() {
        for p in tree.points_under(c) {
            labels[p] = label as i32;
        }
    }
    ClusterLabeling {
        labels,
        cluster_count: selected.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::build_mst;

    fn e(a: usize, b: usize, weight: f64) -> MstEdge {
        MstEdge { a, b, weight }
    }

    /// Two groups of four joined at distance 4. Group A = {0,1,2,3} splits
    /// at 2 into {0,1} (joined at 1.6) and {2,3} (joined at 1.5); group
    /// B = {4,5,6,7} splits at 2 into {4,5} and {6,7}, both joined at 1.
    fn toy_mst() -> Vec<MstEdge> {
        vec![
            e(3, 4, 4.0),
            e(0, 1, 1.6),
            e(2, 3, 1.5),
            e(1, 2, 2.0),
            e(4, 5, 1.0),
            e(6, 7, 1.0),
            e(5, 6, 2.0),
        ]
    }

    #[test]
    fn toy_stabilities_match_hand_trace() {
        let t = condense_tree(&toy_mst(), 8, 2);
        // root, A, B, then the four pairs.
        assert_eq!(t.clusters.len(), 7);
        let by_points = |pts: &[usize]| {
            (0..t.clusters.len())
                .find(|&c| t.points_under(c) == pts)
                .unwrap_or_else(|| panic!("no cluster {pts:?}"))
        };
        let a = by_points(&[0, 1, 2, 3]);
        let b = by_points(&[4, 5, 6, 7]);
        let a01 = by_points(&[0, 1]);
        let a23 = by_points(&[2, 3]);
        let b45 = by_points(&[4, 5]);
        let b67 = by_points(&[6, 7]);
        let close = |x: f64, y: f64| assert!((x - y).abs() < 1e-12, "{x} != {y}");
        // A and B are born at lambda 1/4 and split at 1/2.
        close(t.clusters[a].birth_lambda, 0.25);
        close(t.clusters[a].stability, 4.0 * (0.5 - 0.25));
        close(t.clusters[b].stability, 4.0 * (0.5 - 0.25));
        close(t.clusters[a01].stability, 2.0 * (1.0 / 1.6 - 0.5));
        close(t.clusters[a23].stability, 2.0 * (1.0 / 1.5 - 0.5));
        close(t.clusters[b45].stability, 2.0 * (1.0 - 0.5));
        close(t.clusters[b67].stability, 2.0 * (1.0 - 0.5));
        close(t.clusters[0].stability, 8.0 * 0.25);

        // A beats its children (1.0 > 0.25 + 1/3); B loses to its (1.0 < 2.0).
        assert_eq!(t.select_clusters(), {
            let mut s = vec![a, b45, b67];
            s.sort();
            s
        });
        let l = extract_clusters(&t);
        assert_eq!(l.cluster_count, 3);
        assert_eq!(l.noise_count(), 0);
        assert!(l.labels[..4].iter().all(|&x| x == l.labels[0]));
        assert_eq!(l.labels[4], l.labels[5]);
        assert_ne!(l.labels[5], l.labels[6]);
    }

    #[test]
    fn small_splits_fall_out() {
        // Tight group of 6 plus an isolated point joined last.
        let mut mst: Vec<MstEdge> = (0..5).map(|i| e(i, i + 1, 1.0)).collect();
        mst.push(e(5, 6, 10.0));
        let t = condense_tree(&mst, 7, 3);
        assert_eq!(t.clusters.len(), 1);
        assert!(t.clusters[0].fallen.contains(&(6, 0.1)));
        let l = extract_clusters(&t);
        assert_eq!(l.cluster_count, 1);
        assert!(l.labels.iter().all(|&x| x == 0));
    }

    #[test]
    fn two_far_blobs_give_root_plus_two() {
        let pts: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).chain((0..20).map(|i| 100.0 + i as f64 * 0.1)).collect();
        let mst = build_mst(40, |a, b| (pts[a] - pts[b]).abs());
        let t = condense_tree(&mst, 40, 15);
        assert_eq!(t.clusters.len(), 3);
        assert_eq!(t.clusters[0].children.len(), 2);
    }

    #[test]
    fn stability_equals_per_point_sum() {
        let t = condense_tree(&toy_mst(), 8, 2);
        for (c, cl) in t.clusters.iter().enumerate() {
            // Each point leaves c either by falling out or via a child split.
            let mut direct = 0.0;
            for p in t.points_under(c) {
                let leave = cl
                    .fallen
                    .iter()
                    .find(|f| f.0 == p)
                    .map(|f| f.1)
                    .or_else(|| {
                        cl.children
                            .iter()
                            .find(|&&ch| t.points_under(ch).contains(&p))
                            .map(|&ch| t.clusters[ch].birth_lambda)
                    })
                    .unwrap();
                direct += leave - cl.birth_lambda;
            }
            assert!((direct - cl.stability).abs() < 1e-12, "cluster {c}");
        }
    }
}
