//! Huffman coding of the vocabulary for the hierarchical-softmax output layer.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use ndarray::Array2;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::linalg::dot;

/// Binary Huffman code over word counts plus the output-layer vectors of
/// its `n - 1` inner nodes.
///
/// `paths[w]` lists inner-node indices from the root down to the parent of
/// leaf `w`; `codes[w][i]` is the branch taken below `paths[w][i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct HuffmanCoding {
    pub(crate) paths: Vec<Vec<u32>>,
    pub(crate) codes: Vec<Vec<u8>>,
    pub(crate) inner_node_vectors: Array2<f64>,
}

pub fn build_huffman_coding(vocab: &Vocabulary, dim: usize) -> HuffmanCoding {
    HuffmanCoding::from_counts(vocab.counts(), dim)
}

impl HuffmanCoding {
    /// Builds the tree with zero-initialized inner-node vectors.
    ///
    /// Equal weights merge the lower node id first; leaves have ids
    /// `0..n`, inner nodes are numbered in creation order after them.
    pub fn from_counts(counts: &[u64], dim: usize) -> Self {
        let n = counts.len();
        assert!(n > 0, "Huffman coding needs at least one word");
        let mut heap: BinaryHeap<Reverse<(u64, usize)>> =
            counts.iter().enumerate().map(|(i, &c)| Reverse((c, i))).collect();
        // parent[node] = (inner node id, branch bit)
        let mut parent = vec![(0usize, 0u8); 2 * n - 1];
        let mut next = n;
        while heap.len() > 1 {
            let Reverse((w0, a)) = heap.pop().unwrap();
            let Reverse((w1, b)) = heap.pop().unwrap();
            parent[a] = (next, 0);
            parent[b] = (next, 1);
            heap.push(Reverse((w0 + w1, next)));
            next += 1;
        }
        let root = 2 * n - 2;

        let mut paths = Vec::with_capacity(n);
        let mut codes = Vec::with_capacity(n);
        for leaf in 0..n {
            let mut path = Vec::new();
            let mut code = Vec::new();
            let mut node = leaf;
            while node != root {
                let (p, bit) = parent[node];
                path.push((p - n) as u32);
                code.push(bit);
                node = p;
            }
            path.reverse();
            code.reverse();
            paths.push(path);
            codes.push(code);
        }
        HuffmanCoding {
            paths,
            codes,
            inner_node_vectors: Array2::zeros((n - 1, dim)),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.paths.len()
    }

    pub fn dim(&self) -> usize {
        self.inner_node_vectors.ncols()
    }

    pub fn path(&self, word: u32) -> &[u32] {
        &self.paths[word as usize]
    }

    pub fn code(&self, word: u32) -> &[u8] {
        &self.codes[word as usize]
    }

    pub fn code_len(&self, word: u32) -> usize {
        self.codes[word as usize].len()
    }

    pub fn inner_node_vectors(&self) -> &Array2<f64> {
        &self.inner_node_vectors
    }

    /// Replaces the inner-node vectors, checking the shape.
    pub fn set_inner_node_vectors(&mut self, vectors: Array2<f64>) -> Result<()> {
        let want = (self.vocab_size() - 1, self.dim());
        if vectors.dim() != want {
            return Err(Error::InvalidInput(format!(
                "inner-node matrix has shape {:?}, expected {want:?}",
                vectors.dim()
            )));
        }
        self.inner_node_vectors = vectors;
        Ok(())
    }

    /// Probability the hierarchical softmax assigns to `word` given
    /// `predictor`: the product of branch sigmoids along the word's path.
    pub fn probability(&self, predictor: &[f64], word: u32) -> Result<f64> {
        let (path, code) = self.lookup(word)?;
        let mut p = 1.0;
        for (&node, &bit) in path.iter().zip(code) {
            let f = dot(predictor, self.inner_row(node));
            p *= if bit == 0 { sigmoid(f) } else { sigmoid(-f) };
        }
        Ok(p)
    }

    /// `-ln P(word | predictor)`, computed in log space.
    pub fn neg_log_probability(&self, predictor: &[f64], word: u32) -> Result<f64> {
        let (path, code) = self.lookup(word)?;
        Ok(path
            .iter()
            .zip(code)
            .map(|(&node, &bit)| {
                let f = dot(predictor, self.inner_row(node));
                softplus(if bit == 0 { -f } else { f })
            })
            .sum())
    }

    fn lookup(&self, word: u32) -> Result<(&[u32], &[u8])> {
        let w = word as usize;
        if w >= self.paths.len() {
            return Err(Error::InvalidInput(format!(
                "word index {word} out of range for vocabulary of {}",
                self.paths.len()
            )));
        }
        Ok((&self.paths[w], &self.codes[w]))
    }

    pub(crate) fn inner_row(&self, node: u32) -> &[f64] {
        self.inner_node_vectors
            .row(node as usize)
            .to_slice()
            .expect("inner-node matrix is row-major")
    }
}

/// Free-function form of [`HuffmanCoding::probability`].
pub fn hs_probability(predictor: &[f64], word: u32, coding: &HuffmanCoding) -> Result<f64> {
    coding.probability(predictor, word)
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`
#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}
