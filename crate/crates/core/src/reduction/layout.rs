use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FuzzyGraph, ReductionConfig};
use crate::error::{Error, Result};

/// Parameters of the low-dimensional similarity `1 / (1 + a * r^(2b))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveParams {
    pub a: f64,
    pub b: f64,
}

const CURVE_SAMPLES: usize = 300;
const SPREAD: f64 = 1.0;
const GRADIENT_CLIP: f64 = 4.0;

fn curve_target(min_dist: f64) -> (Vec<f64>, Vec<f64>) {
    let xs: Vec<f64> = (0..CURVE_SAMPLES)
        .map(|i| 3.0 * SPREAD * i as f64 / (CURVE_SAMPLES - 1) as f64)
        .collect();
    let ys = xs
        .iter()
        .map(|&x| if x < min_dist { 1.0 } else { (-(x - min_dist) / SPREAD).exp() })
        .collect();
    (xs, ys)
}

pub(crate) fn curve_sse(params: CurveParams, min_dist: f64) -> f64 {
    let (xs, ys) = curve_target(min_dist);
    xs.iter()
        .zip(&ys)
        .map(|(&x, &y)| {
            let r = 1.0 / (1.0 + params.a * x.powf(2.0 * params.b)) - y;
            r * r
        })
        .sum()
}

/// Least-squares fit of `(a, b)` so that `1 / (1 + a x^(2b))` follows
/// 1 below `min_dist` and `exp(-(x - min_dist))` above it on `[0, 3]`.
///
/// Levenberg-Marquardt from `(1, 1)`. For `min_dist = 0.1` this gives
/// `a ~ 1.577`, `b ~ 0.895`.
pub fn fit_curve_params(min_dist: f64) -> CurveParams {
    let (xs, ys) = curve_target(min_dist);
    let sse = |a: f64, b: f64| curve_sse(CurveParams { a, b }, min_dist);
    let (mut a, mut b) = (1.0f64, 1.0f64);
    let mut damping = 1e-3;
    let mut cost = sse(a, b);
    for _ in 0..500 {
        // Normal equations J^T J delta = -J^T r.
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in xs.iter().zip(&ys) {
            if x == 0.0 {
                continue;
            }
            let u = x.powf(2.0 * b);
            let denom = 1.0 + a * u;
            let f = 1.0 / denom;
            let r = f - y;
            let da = -u / (denom * denom);
            let db = -a * u * 2.0 * x.ln() / (denom * denom);
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ga += da * r;
            gb += db * r;
        }
        let (maa, mbb) = (jaa * (1.0 + damping), jbb * (1.0 + damping));
        let det = maa * mbb - jab * jab;
        if det.abs() < f64::MIN_POSITIVE {
            break;
        }
        let step_a = -(mbb * ga - jab * gb) / det;
        let step_b = -(maa * gb - jab * ga) / det;
        let (na, nb) = (a + step_a, b + step_b);
        let new_cost = if na > 0.0 && nb > 0.0 { sse(na, nb) } else { f64::INFINITY };
        if new_cost < cost {
            let converged = cost - new_cost < 1e-15 * cost.max(1e-300);
            a = na;
            b = nb;
            cost = new_cost;
            damping = (damping * 0.3).max(1e-12);
            if converged {
                break;
            }
        } else {
            damping *= 10.0;
            if damping > 1e12 {
                break;
            }
        }
    }
    CurveParams { a, b }
}

/// Stochastic-gradient layout of the fuzzy graph.
///
/// Coordinates start uniform in `[-10, 10]`. Each epoch visits every edge
/// (both directions) at a rate proportional to its weight, pulls its
/// endpoints together, and pushes the head away from
/// `negative_sample_rate` uniformly drawn points. The learning rate decays
/// linearly from 1 to 0.
pub fn optimize_layout(graph: &FuzzyGraph, config: &ReductionConfig) -> Result<Array2<f64>> {
    let n = graph.n_points();
    let dim = config.n_components;
    if n == 0 {
        return Err(Error::InvalidInput("cannot lay out an empty graph".into()));
    }
    if dim == 0 {
        return Err(Error::InvalidConfig("n_components must be at least 1".into()));
    }
    let CurveParams { a, b } = fit_curve_params(config.min_dist);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut y = Array2::from_shape_simple_fn((n, dim), || rng.random_range(-10.0..10.0));
    let epochs = config.layout_epochs;
    if epochs == 0 || graph.edges().is_empty() {
        return Ok(y);
    }

    let w_max = graph.edges().iter().map(|e| e.2).fold(0.0, f64::max);
    let mut heads = Vec::with_capacity(2 * graph.edges().len());
    let mut tails = Vec::with_capacity(heads.capacity());
    let mut epochs_per_sample = Vec::with_capacity(heads.capacity());
    for &(i, j, w) in graph.edges() {
        let samples = epochs as f64 * w / w_max;
        if samples <= 0.0 {
            continue;
        }
        for (h, t) in [(i, j), (j, i)] {
            heads.push(h);
            tails.push(t);
            epochs_per_sample.push(epochs as f64 / samples);
        }
    }
    let neg_rate = config.negative_sample_rate as f64;
    let epochs_per_negative: Vec<f64> = epochs_per_sample
        .iter()
        .map(|e| if neg_rate > 0.0 { e / neg_rate } else { f64::INFINITY })
        .collect();
    let mut next_sample = epochs_per_sample.clone();
    let mut next_negative = epochs_per_negative.clone();

    let ys = y.as_slice_mut().expect("row-major");
    let mut delta = vec![0.0; dim];
    for epoch in 0..epochs {
        let alpha = 1.0 - epoch as f64 / epochs as f64;
        let now = epoch as f64;
        for e in 0..heads.len() {
            if next_sample[e] > now {
                continue;
            }
            let (h, t) = (heads[e], tails[e]);
            let d2 = sq_dist(ys, h, t, dim);
            let coeff = if d2 > 0.0 {
                -2.0 * a * b * d2.powf(b - 1.0) / (a * d2.powf(b) + 1.0)
            } else {
                0.0
            };
            for k in 0..dim {
                delta[k] = clip(coeff * (ys[h * dim + k] - ys[t * dim + k])) * alpha;
            }
            for k in 0..dim {
                ys[h * dim + k] += delta[k];
                ys[t * dim + k] -= delta[k];
            }
            next_sample[e] += epochs_per_sample[e];

            let n_neg = ((now - next_negative[e]) / epochs_per_negative[e]).floor().max(0.0) as usize;
            for _ in 0..n_neg {
                let other = rng.random_range(0..n);
                if other == h {
                    continue;
                }
                let d2 = sq_dist(ys, h, other, dim);
                let coeff = if d2 > 0.0 {
                    2.0 * b / ((0.001 + d2) * (a * d2.powf(b) + 1.0))
                } else {
                    0.0
                };
                for k in 0..dim {
                    let g = if coeff > 0.0 {
                        clip(coeff * (ys[h * dim + k] - ys[other * dim + k]))
                    } else {
                        GRADIENT_CLIP
                    };
                    ys[h * dim + k] += g * alpha;
                }
            }
            next_negative[e] += n_neg as f64 * epochs_per_negative[e];
        }
    }
    Ok(y)
}

#[inline]
fn clip(x: f64) -> f64 {
    x.clamp(-GRADIENT_CLIP, GRADIENT_CLIP)
}

#[inline]
fn sq_dist(ys: &[f64], i: usize, j: usize, dim: usize) -> f64 {
    (0..dim).map(|k| (ys[i * dim + k] - ys[j * dim + k]).powi(2)).sum()
}
