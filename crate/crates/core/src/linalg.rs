//! Small dense-vector helpers shared by the embedding, reduction and topic
//! stages.

use std::cmp::Ordering;

use ndarray::ArrayView2;

use crate::error::{Error, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_euclidean(a, b).sqrt()
}

/// Cosine similarity in `[-1, 1]`. Fails if either vector has zero length.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Returns `v / |v|`, or an error for the zero vector.
pub fn normalized(v: &[f64]) -> Result<Vec<f64>> {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

/// Descending by score, ascending by index on ties.
pub(crate) fn rank_desc(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Keeps the `top_n` highest-scoring entries, highest first.
pub(crate) fn top_n(mut scored: Vec<(usize, f64)>, top_n: usize) -> Vec<(usize, f64)> {
    let n = top_n.min(scored.len());
    if n == 0 {
        return Vec::new();
    }
    if n < scored.len() {
        scored.select_nth_unstable_by(n - 1, rank_desc);
        scored.truncate(n);
    }
    scored.sort_by(rank_desc);
    scored
}

/// Exact top-n rows of `rows` by cosine similarity to `query`.
///
/// Rows with zero length score 0.
pub fn cosine_top_n(rows: ArrayView2<'_, f64>, query: &[f64], n: usize) -> Result<Vec<(usize, f64)>> {
    let q = normalized(query)?;
    if rows.ncols() != q.len() {
        return Err(Error::InvalidInput(format!(
            "query has dimension {}, expected {}",
            q.len(),
            rows.ncols()
        )));
    }
    let q = ndarray::ArrayView1::from(&q[..]);
    let scored = rows
        .outer_iter()
        .enumerate()
        .map(|(i, row)| {
            let nr = row.dot(&row).sqrt();
            let sim = if nr == 0.0 {
                0.0
            } else {
                (row.dot(&q) / nr).clamp(-1.0, 1.0)
            };
            (i, sim)
        })
        .collect();
    Ok(top_n(scored, n))
}
