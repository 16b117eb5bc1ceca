//! Jointly trained document and word vectors.
//!
//! Documents are embedded with distributed bag of words (a document vector
//! predicts the words it contains) interleaved with skip-gram word training
//! (a word vector predicts its neighbours). Both share one
//! hierarchical-softmax output layer, so document vectors and word vectors
//! end up in the same space and can be compared directly.

mod huffman;
mod train;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Vocabulary, DEFAULT_MIN_COUNT, DEFAULT_SUBSAMPLE_THRESHOLD};
use crate::error::{Error, Result};
use crate::linalg::{self, normalized};

pub use huffman::{build_huffman_coding, hs_probability, HuffmanCoding};
pub use train::{train, train_with_report, EpochStats, TrainingReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkerMode {
    /// Single-threaded; output is a pure function of corpus, config and seed.
    #[default]
    Deterministic,
    /// Lock-free multi-threaded updates. Not reproducible.
    Parallel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub vector_size: usize,
    /// Words on each side of the centre word.
    pub window: usize,
    pub epochs: usize,
    /// Decays linearly to `final_learning_rate` over the scheduled tokens.
    pub initial_learning_rate: f64,
    pub final_learning_rate: f64,
    pub min_count: u64,
    pub subsample_threshold: f64,
    pub seed: u64,
    pub worker_mode: WorkerMode,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            vector_size: 300,
            window: 15,
            epochs: 40,
            initial_learning_rate: 0.025,
            final_learning_rate: 1e-4,
            min_count: DEFAULT_MIN_COUNT,
            subsample_threshold: DEFAULT_SUBSAMPLE_THRESHOLD,
            seed: 0,
            worker_mode: WorkerMode::Deterministic,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if self.vector_size == 0 {
            return bad("vector_size must be at least 1");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.initial_learning_rate > 0.0) || !(self.final_learning_rate >= 0.0) {
            return bad("learning rates must be positive");
        }
        if self.min_count == 0 {
            return bad("min_count must be at least 1");
        }
        if !(self.subsample_threshold > 0.0) {
            return bad("subsample_threshold must be positive");
        }
        Ok(())
    }
}

/// Trained document vectors, word vectors and the shared output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticEmbedding {
    pub(crate) doc_vectors: Array2<f64>,
    pub(crate) word_vectors: Array2<f64>,
    pub(crate) coding: HuffmanCoding,
    pub(crate) vocabulary: Vocabulary,
    pub(crate) doc_ids: Vec<String>,
}

impl SemanticEmbedding {
    /// Fresh model: word and document vectors uniform in
    /// `[-0.5/d, 0.5/d]`, inner-node vectors zero.
    pub fn initialize(vocabulary: Vocabulary, doc_ids: Vec<String>, dim: usize, rng: &mut impl Rng) -> Self {
        let half = 0.5 / dim as f64;
        let mut init = |rows: usize| Array2::from_shape_simple_fn((rows, dim), || rng.random_range(-half..half));
        let word_vectors = init(vocabulary.len());
        let doc_vectors = init(doc_ids.len());
        let coding = build_huffman_coding(&vocabulary, dim);
        SemanticEmbedding {
            doc_vectors,
            word_vectors,
            coding,
            vocabulary,
            doc_ids,
        }
    }

    /// Same as [`initialize`](Self::initialize) with a seeded generator.
    pub fn seeded(vocabulary: Vocabulary, doc_ids: Vec<String>, dim: usize, seed: u64) -> Self {
        Self::initialize(vocabulary, doc_ids, dim, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// Reassembles a model from stored parts, re-checking every shape and
    /// that all entries are finite.
    pub fn from_parts(
        vocabulary: Vocabulary,
        doc_ids: Vec<String>,
        doc_vectors: Array2<f64>,
        word_vectors: Array2<f64>,
        inner_node_vectors: Array2<f64>,
    ) -> Result<Self> {
        let dim = word_vectors.ncols();
        if word_vectors.nrows() != vocabulary.len() {
            return Err(Error::InvalidInput(format!(
                "{} word vectors for a vocabulary of {}",
                word_vectors.nrows(),
                vocabulary.len()
            )));
        }
        if doc_vectors.dim() != (doc_ids.len(), dim) {
            return Err(Error::InvalidInput(format!(
                "document matrix has shape {:?}, expected ({}, {dim})",
                doc_vectors.dim(),
                doc_ids.len()
            )));
        }
        let finite = |m: &Array2<f64>| m.iter().all(|x| x.is_finite());
        if !finite(&doc_vectors) || !finite(&word_vectors) || !finite(&inner_node_vectors) {
            return Err(Error::InvalidInput("embedding contains non-finite entries".into()));
        }
        let mut coding = build_huffman_coding(&vocabulary, dim);
        coding.set_inner_node_vectors(inner_node_vectors)?;
        Ok(SemanticEmbedding {
            doc_vectors,
            word_vectors,
            coding,
            vocabulary,
            doc_ids,
        })
    }

    pub fn dim(&self) -> usize {
        self.word_vectors.ncols()
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_index(&self, id: &str) -> Option<usize> {
        self.doc_ids.iter().position(|d| d == id)
    }

    pub fn doc_vectors(&self) -> ArrayView2<'_, f64> {
        self.doc_vectors.view()
    }

    pub fn word_vectors(&self) -> ArrayView2<'_, f64> {
        self.word_vectors.view()
    }

    pub fn coding(&self) -> &HuffmanCoding {
        &self.coding
    }

    pub fn doc_vector(&self, doc: usize) -> ArrayView1<'_, f64> {
        self.doc_vectors.row(doc)
    }

    pub fn word_vector(&self, word: u32) -> ArrayView1<'_, f64> {
        self.word_vectors.row(word as usize)
    }

    /// Looks up a word's vector by string.
    pub fn vector_for_word(&self, word: &str) -> Result<Vec<f64>> {
        let idx = self
            .vocabulary
            .index_of(word)
            .ok_or_else(|| Error::UnknownWords(vec![word.to_owned()]))?;
        Ok(self.word_vector(idx).to_vec())
    }

    /// Exact top-n words by cosine similarity to `query`, most similar first.
    pub fn nearest_words(&self, query: &[f64], top_n: usize) -> Result<Vec<(String, f64)>> {
        nearest_words(self, query, top_n)
    }
}

pub use linalg::cosine_similarity;

/// Exact top-n words by cosine similarity to `query`; ties go to the lower
/// word index.
pub fn nearest_words(embedding: &SemanticEmbedding, query: &[f64], top_n: usize) -> Result<Vec<(String, f64)>> {
    if top_n == 0 {
        return Err(Error::InvalidInput("top_n must be at least 1".into()));
    }
    Ok(linalg::cosine_top_n(embedding.word_vectors(), query, top_n)?
        .into_iter()
        .map(|(i, s)| (embedding.vocabulary.words()[i].clone(), s))
        .collect())
}

/// `sum(positive) - sum(negative)`, normalized to unit length.
pub fn compose_query<P, N>(positive: &[P], negative: &[N]) -> Result<Vec<f64>>
where
    P: AsRef<[f64]>,
    N: AsRef<[f64]>,
{
    let dim = positive
        .first()
        .map(|v| v.as_ref().len())
        .or_else(|| negative.first().map(|v| v.as_ref().len()))
        .ok_or_else(|| Error::InvalidInput("query needs at least one vector".into()))?;
    let mut acc = vec![0.0; dim];
    let mut scale = 0.0f64;
    for (vectors, sign) in [
        (positive.iter().map(AsRef::as_ref).collect::<Vec<_>>(), 1.0),
        (negative.iter().map(AsRef::as_ref).collect::<Vec<_>>(), -1.0),
    ] {
        for v in vectors {
            if v.len() != dim {
                return Err(Error::InvalidInput("query vectors differ in dimension".into()));
            }
            linalg::axpy(sign, v, &mut acc);
            scale = scale.max(linalg::norm(v));
        }
    }
    // Cancellation residue below this is treated as an exact zero.
    if linalg::norm(&acc) <= scale * 1e-12 {
        return Err(Error::ZeroVector);
    }
    normalized(&acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn random_model(words: usize, dim: usize, seed: u64) -> SemanticEmbedding {
        let vocab = Vocabulary::from_counts((0..words).map(|i| (format!("w{i:04}"), 10)), 10 * words as u64, 1, 1e-3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = SemanticEmbedding::initialize(vocab, vec!["d".into()], dim, &mut rng);
        m.word_vectors.mapv_inplace(|_| rng.random_range(-1.0..1.0));
        m
    }

    #[test]
    fn config_rejects_zero_epochs() {
        let c = EmbeddingConfig {
            epochs: 0,
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        assert!(EmbeddingConfig::default().validate().is_ok());
    }

    #[test]
    fn initialization_range() {
        let m = random_model(3, 8, 1);
        let half = 0.5 / 8.0;
        assert!(m.doc_vectors.iter().all(|x| x.abs() <= half));
        assert!(m.coding.inner_node_vectors().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn nearest_word_to_itself() {
        let m = random_model(50, 6, 2);
        let q = m.word_vector(17).to_vec();
        let got = m.nearest_words(&q, 3).unwrap();
        assert_eq!(got[0].0, "w0017");
        assert_abs_diff_eq!(got[0].1, 1.0, epsilon = 1e-12);
        assert_eq!(m.nearest_words(&q, 500).unwrap().len(), 50);
        assert!(matches!(m.nearest_words(&[0.0; 6], 3), Err(Error::ZeroVector)));
    }

    #[test]
    fn nearest_words_matches_exhaustive_scan() {
        let m = random_model(1000, 10, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..5 {
            let q: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
            let got = m.nearest_words(&q, 25).unwrap();
            // Oracle: score every row with the plain cosine formula, then sort.
            let mut all: Vec<(usize, f64)> = (0..1000)
                .map(|i| {
                    let w = m.word_vector(i as u32);
                    let (mut d, mut nw, mut nq) = (0.0, 0.0, 0.0);
                    for k in 0..10 {
                        d += w[k] * q[k];
                        nw += w[k] * w[k];
                        nq += q[k] * q[k];
                    }
                    (i, d / (nw.sqrt() * nq.sqrt()))
                })
                .collect();
            all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            for (g, e) in got.iter().zip(&all) {
                assert_eq!(g.0, format!("w{:04}", e.0));
                assert_abs_diff_eq!(g.1, e.1, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn compose_query_examples() {
        let v = vec![3.0, 4.0];
        let q = compose_query(&[v.clone()], &[] as &[Vec<f64>]).unwrap();
        assert_abs_diff_eq!(q[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(q[1], 0.8, epsilon = 1e-15);
        assert!(matches!(compose_query(&[v.clone()], &[v.clone()]), Err(Error::ZeroVector)));
        let q = compose_query(&[vec![2.0, 0.0], vec![0.0, 2.0]], &[] as &[Vec<f64>]).unwrap();
        assert_abs_diff_eq!(q[0], 0.7071, epsilon = 1e-4);
        assert_abs_diff_eq!(q[1], 0.7071, epsilon = 1e-4);
        assert!(compose_query(&[] as &[Vec<f64>], &[] as &[Vec<f64>]).is_err());
    }
}
