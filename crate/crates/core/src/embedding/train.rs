//! Gradient steps and the interleaved DBOW / skip-gram training loop.

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::huffman::{sigmoid, softplus};
use super::{EmbeddingConfig, HuffmanCoding, SemanticEmbedding, WorkerMode};
use crate::corpus::{build_vocabulary, Document};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};

/// One hierarchical-softmax SGD step on `-ln P(target | predictor)`.
///
/// `inner` holds inner-node vectors row-major; `path`/`code` index into it.
/// All inner-node updates use the pre-step predictor and the predictor
/// update uses the pre-step inner-node vectors. Returns the loss before
/// the step.
pub(crate) fn hs_update(
    predictor: &mut [f64],
    inner: &mut [f64],
    path: &[u32],
    code: &[u8],
    lr: f64,
    grad: &mut [f64],
) -> f64 {
    let dim = predictor.len();
    let mut loss = 0.0;
    if lr == 0.0 {
        for (&node, &bit) in path.iter().zip(code) {
            let start = node as usize * dim;
            let f = dot(predictor, &inner[start..start + dim]);
            loss += softplus(if bit == 0 { -f } else { f });
        }
        return loss;
    }
    grad.fill(0.0);
    for (&node, &bit) in path.iter().zip(code) {
        let start = node as usize * dim;
        let v = &mut inner[start..start + dim];
        let f = dot(predictor, v);
        loss += softplus(if bit == 0 { -f } else { f });
        // Ascent direction of ln sigma(+-f): (label - sigma(f)), label = 1 - bit.
        let g = (1.0 - f64::from(bit) - sigmoid(f)) * lr;
        axpy(g, v, grad);
        axpy(g, predictor, v);
    }
    axpy(1.0, grad, predictor);
    loss
}

fn row_mut(m: &mut Array2<f64>, r: usize) -> &mut [f64] {
    m.row_mut(r).into_slice().expect("matrices are row-major")
}

impl SemanticEmbedding {
    /// Skip-gram step: the input vector of `surrounding_word` predicts
    /// `context_word` through its Huffman path. Returns the negative
    /// log-likelihood before the update.
    pub fn train_step_skipgram(&mut self, surrounding_word: u32, context_word: u32, lr: f64) -> f64 {
        let grad = vec![0.0; self.dim()];
        SerialSink { model: self, grad }.skipgram(surrounding_word, context_word, lr)
    }

    /// DBOW step: the vector of `document` predicts `target_word`.
    pub fn train_step_dbow(&mut self, document: usize, target_word: u32, lr: f64) -> f64 {
        let grad = vec![0.0; self.dim()];
        SerialSink { model: self, grad }.dbow(document, target_word, lr)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean pre-update loss per step (nats).
    pub mean_loss: f64,
    pub steps: u64,
    /// Learning rate at the end of the epoch.
    pub learning_rate: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub epochs: Vec<EpochStats>,
}

/// Trains an embedding for `docs`, building the vocabulary from them.
pub fn train(docs: &[Document], config: &EmbeddingConfig) -> Result<SemanticEmbedding> {
    train_with_report(docs, config).map(|(m, _)| m)
}

pub fn train_with_report(docs: &[Document], config: &EmbeddingConfig) -> Result<(SemanticEmbedding, TrainingReport)> {
    config.validate()?;
    if docs.is_empty() {
        return Err(Error::InvalidInput("corpus is empty".into()));
    }
    let vocab = build_vocabulary(docs, config.min_count, config.subsample_threshold)?;
    let corpus: Vec<Vec<u32>> = docs.iter().map(|d| vocab.encode(&d.raw)).collect();
    let ids = docs.iter().map(|d| d.id.clone()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = SemanticEmbedding::initialize(vocab, ids, config.vector_size, &mut rng);
    let schedule = Schedule::new(config, corpus.iter().map(Vec::len).sum());
    let report = match config.worker_mode {
        WorkerMode::Deterministic => train_serial(&mut model, &corpus, config, &schedule, &mut rng),
        WorkerMode::Parallel => train_hogwild(&mut model, &corpus, config, &schedule),
    };
    log::debug!("trained {} epochs, final loss {:?}", report.epochs.len(), report.epochs.last().map(|e| e.mean_loss));
    Ok((model, report))
}

struct Schedule {
    start: f64,
    end: f64,
    total: f64,
}

impl Schedule {
    fn new(config: &EmbeddingConfig, tokens_per_epoch: usize) -> Self {
        Schedule {
            start: config.initial_learning_rate,
            end: config.final_learning_rate.min(config.initial_learning_rate),
            total: (config.epochs * tokens_per_epoch).max(1) as f64,
        }
    }

    fn rate(&self, processed: u64) -> f64 {
        let progress = (processed as f64 / self.total).min(1.0);
        self.start - (self.start - self.end) * progress
    }
}

/// Parameter storage a training worker updates.
trait StepSink {
    fn skipgram(&mut self, surrounding_word: u32, context_word: u32, lr: f64) -> f64;
    fn dbow(&mut self, document: usize, target_word: u32, lr: f64) -> f64;
}

#[derive(Default)]
struct Tally {
    loss: f64,
    steps: u64,
}

/// One pass over a document: subsample, then for every surviving position
/// run skip-gram over a randomly shrunk window around it followed by a DBOW
/// step for the centre word.
fn train_document<S: StepSink>(
    sink: &mut S,
    doc: usize,
    tokens: &[u32],
    keep: &[f64],
    window: usize,
    lr: f64,
    rng: &mut ChaCha8Rng,
    kept: &mut Vec<u32>,
    tally: &mut Tally,
) {
    kept.clear();
    for &w in tokens {
        let p = keep[w as usize];
        if p >= 1.0 || rng.random::<f64>() < p {
            kept.push(w);
        }
    }
    for pos in 0..kept.len() {
        let reach = rng.random_range(1..=window);
        let center = kept[pos];
        let lo = pos.saturating_sub(reach);
        let hi = (pos + reach + 1).min(kept.len());
        for j in (lo..hi).filter(|&j| j != pos) {
            tally.loss += sink.skipgram(kept[j], center, lr);
            tally.steps += 1;
        }
        tally.loss += sink.dbow(doc, center, lr);
        tally.steps += 1;
    }
}

struct SerialSink<'a> {
    model: &'a mut SemanticEmbedding,
    grad: Vec<f64>,
}

impl StepSink for SerialSink<'_> {
    fn skipgram(&mut self, surrounding_word: u32, context_word: u32, lr: f64) -> f64 {
        let coding = &mut self.model.coding;
        hs_update(
            row_mut(&mut self.model.word_vectors, surrounding_word as usize),
            coding.inner_node_vectors.as_slice_mut().expect("row-major"),
            &coding.paths[context_word as usize],
            &coding.codes[context_word as usize],
            lr,
            &mut self.grad,
        )
    }

    fn dbow(&mut self, document: usize, target_word: u32, lr: f64) -> f64 {
        let coding = &mut self.model.coding;
        hs_update(
            row_mut(&mut self.model.doc_vectors, document),
            coding.inner_node_vectors.as_slice_mut().expect("row-major"),
            &coding.paths[target_word as usize],
            &coding.codes[target_word as usize],
            lr,
            &mut self.grad,
        )
    }
}

fn train_serial(
    model: &mut SemanticEmbedding,
    corpus: &[Vec<u32>],
    config: &EmbeddingConfig,
    schedule: &Schedule,
    rng: &mut ChaCha8Rng,
) -> TrainingReport {
    let keep = model.vocabulary.keep_probabilities().to_vec();
    let dim = model.dim();
    let mut sink = SerialSink {
        model,
        grad: vec![0.0; dim],
    };
    let mut kept = Vec::new();
    let mut processed = 0u64;
    let mut report = TrainingReport::default();
    for epoch in 0..config.epochs {
        let mut tally = Tally::default();
        for (doc, tokens) in corpus.iter().enumerate() {
            let lr = schedule.rate(processed);
            train_document(&mut sink, doc, tokens, &keep, config.window, lr, rng, &mut kept, &mut tally);
            processed += tokens.len() as u64;
        }
        report.epochs.push(EpochStats {
            epoch: epoch + 1,
            mean_loss: tally.loss / tally.steps.max(1) as f64,
            steps: tally.steps,
            learning_rate: schedule.rate(processed),
        });
    }
    report
}

/// Row-major matrix of `f64` bit patterns shared between workers without
/// locks. Concurrent writers may overwrite each other's updates.
struct AtomicMatrix {
    data: Vec<AtomicU64>,
    cols: usize,
}

impl AtomicMatrix {
    fn from_array(a: &Array2<f64>) -> Self {
        AtomicMatrix {
            data: a.iter().map(|x| AtomicU64::new(x.to_bits())).collect(),
            cols: a.ncols(),
        }
    }

    fn load_row(&self, row: usize, out: &mut [f64]) {
        let cells = &self.data[row * self.cols..(row + 1) * self.cols];
        for (o, c) in out.iter_mut().zip(cells) {
            *o = f64::from_bits(c.load(Ordering::Relaxed));
        }
    }

    fn store_row(&self, row: usize, values: &[f64]) {
        let cells = &self.data[row * self.cols..(row + 1) * self.cols];
        for (v, c) in values.iter().zip(cells) {
            c.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    fn write_into(&self, a: &mut Array2<f64>) {
        for (dst, c) in a.iter_mut().zip(&self.data) {
            *dst = f64::from_bits(c.load(Ordering::Relaxed));
        }
    }
}

struct SharedParams {
    docs: AtomicMatrix,
    words: AtomicMatrix,
    inner: AtomicMatrix,
}

/// Gathers the rows a step touches into local buffers, runs the ordinary
/// step on them and scatters the result back.
struct HogwildSink<'a> {
    shared: &'a SharedParams,
    coding: &'a HuffmanCoding,
    local_path: &'a [u32],
    predictor: Vec<f64>,
    nodes: Vec<f64>,
    grad: Vec<f64>,
}

impl HogwildSink<'_> {
    fn step(&mut self, source: &AtomicMatrix, row: usize, target_word: u32, lr: f64) -> f64 {
        let dim = self.predictor.len();
        let path = self.coding.path(target_word);
        let code = self.coding.code(target_word);
        source.load_row(row, &mut self.predictor);
        self.nodes.resize(path.len() * dim, 0.0);
        for (i, &node) in path.iter().enumerate() {
            self.shared.inner.load_row(node as usize, &mut self.nodes[i * dim..(i + 1) * dim]);
        }
        let loss = hs_update(
            &mut self.predictor,
            &mut self.nodes,
            &self.local_path[..path.len()],
            code,
            lr,
            &mut self.grad,
        );
        for (i, &node) in path.iter().enumerate() {
            self.shared.inner.store_row(node as usize, &self.nodes[i * dim..(i + 1) * dim]);
        }
        source.store_row(row, &self.predictor);
        loss
    }
}

impl StepSink for HogwildSink<'_> {
    fn skipgram(&mut self, surrounding_word: u32, context_word: u32, lr: f64) -> f64 {
        let shared = self.shared;
        self.step(&shared.words, surrounding_word as usize, context_word, lr)
    }

    fn dbow(&mut self, document: usize, target_word: u32, lr: f64) -> f64 {
        let shared = self.shared;
        self.step(&shared.docs, document, target_word, lr)
    }
}

fn train_hogwild(
    model: &mut SemanticEmbedding,
    corpus: &[Vec<u32>],
    config: &EmbeddingConfig,
    schedule: &Schedule,
) -> TrainingReport {
    let shared = SharedParams {
        docs: AtomicMatrix::from_array(&model.doc_vectors),
        words: AtomicMatrix::from_array(&model.word_vectors),
        inner: AtomicMatrix::from_array(&model.coding.inner_node_vectors),
    };
    let keep = model.vocabulary.keep_probabilities();
    let coding = &model.coding;
    let dim = model.word_vectors.ncols();
    let max_path = coding.paths.iter().map(Vec::len).max().unwrap_or(0);
    let local_path: Vec<u32> = (0..max_path as u32).collect();
    let chunk = corpus.len().div_ceil(rayon::current_num_threads() * 8).max(1);
    let n_chunks = corpus.len().div_ceil(chunk) as u64;
    let processed = AtomicU64::new(0);

    let mut report = TrainingReport::default();
    for epoch in 0..config.epochs {
        let tally = corpus
            .par_chunks(chunk)
            .enumerate()
            .map(|(c, docs)| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(epoch as u64 * n_chunks + c as u64 + 1);
                let mut sink = HogwildSink {
                    shared: &shared,
                    coding,
                    local_path: &local_path,
                    predictor: vec![0.0; dim],
                    nodes: Vec::new(),
                    grad: vec![0.0; dim],
                };
                let mut kept = Vec::new();
                let mut tally = Tally::default();
                for (i, tokens) in docs.iter().enumerate() {
                    let lr = schedule.rate(processed.load(Ordering::Relaxed));
                    train_document(&mut sink, c * chunk + i, tokens, keep, config.window, lr, &mut rng, &mut kept, &mut tally);
                    processed.fetch_add(tokens.len() as u64, Ordering::Relaxed);
                }
                tally
            })
            .reduce(Tally::default, |a, b| Tally {
                loss: a.loss + b.loss,
                steps: a.steps + b.steps,
            });
        report.epochs.push(EpochStats {
            epoch: epoch + 1,
            mean_loss: tally.loss / tally.steps.max(1) as f64,
            steps: tally.steps,
            learning_rate: schedule.rate(processed.load(Ordering::Relaxed)),
        });
    }
    shared.docs.write_into(&mut model.doc_vectors);
    shared.words.write_into(&mut model.word_vectors);
    shared.inner.write_into(&mut model.coding.inner_node_vectors);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::synthetic::ThemedCorpus;

    fn small_model(seed: u64) -> SemanticEmbedding {
        let vocab = Vocabulary::from_counts(
            [("a", 40), ("b", 20), ("c", 10), ("d", 5), ("e", 5)].map(|(w, c)| (w.to_string(), c)),
            80,
            1,
            1e-3,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = SemanticEmbedding::initialize(vocab, vec!["x".into(), "y".into()], 4, &mut rng);
        m.coding.inner_node_vectors.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        m
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let mut m = small_model(1);
        let before = m.clone();
        let pred = m.word_vector(1).to_vec();
        let expected = m.coding.neg_log_probability(&pred, 3).unwrap();
        let loss = m.train_step_skipgram(1, 3, 0.0);
        assert_eq!(m, before);
        assert!((loss - expected).abs() < 1e-12);
        let loss = m.train_step_dbow(0, 2, 0.0);
        assert_eq!(m, before);
        let expected = m.coding.neg_log_probability(&m.doc_vector(0).to_vec(), 2).unwrap();
        assert!((loss - expected).abs() < 1e-12);
    }

    #[test]
    fn repeated_steps_do_not_increase_loss() {
        let mut m = small_model(2);
        let mut prev = f64::INFINITY;
        for _ in 0..200 {
            let loss = m.train_step_skipgram(0, 4, 0.05);
            assert!(loss <= prev + 1e-12, "{loss} > {prev}");
            prev = loss;
        }
        let mut prev = f64::INFINITY;
        for _ in 0..200 {
            let loss = m.train_step_dbow(1, 2, 0.05);
            assert!(loss <= prev + 1e-12);
            prev = loss;
        }
    }

    #[test]
    fn rejects_empty_corpus_and_vocabulary() {
        let cfg = EmbeddingConfig {
            min_count: 5,
            ..Default::default()
        };
        assert!(matches!(train(&[], &cfg), Err(Error::InvalidInput(_))));
        let docs = vec![Document::new("0", "a b c")];
        assert!(matches!(train(&docs, &cfg), Err(Error::EmptyVocabulary { .. })));
    }

    fn tiny_config(mode: WorkerMode) -> EmbeddingConfig {
        EmbeddingConfig {
            vector_size: 16,
            window: 5,
            epochs: 8,
            min_count: 2,
            subsample_threshold: 1e-2,
            seed: 5,
            worker_mode: mode,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_mode_is_bit_reproducible() {
        let docs = ThemedCorpus::new(2, 20, 8).documents(40, 30, 3);
        let a = train(&docs, &tiny_config(WorkerMode::Deterministic)).unwrap();
        let b = train(&docs, &tiny_config(WorkerMode::Deterministic)).unwrap();
        assert_eq!(a, b);
        let other_seed = EmbeddingConfig {
            seed: 6,
            ..tiny_config(WorkerMode::Deterministic)
        };
        assert_ne!(a, train(&docs, &other_seed).unwrap());
    }

    #[test]
    fn parallel_mode_trains_finite_vectors() {
        let docs = ThemedCorpus::new(2, 20, 8).documents(40, 30, 3);
        let (m, report) = train_with_report(&docs, &tiny_config(WorkerMode::Parallel)).unwrap();
        assert!(m.doc_vectors().iter().all(|x| x.is_finite()));
        assert_eq!(report.epochs.len(), 8);
        assert!(report.epochs.last().unwrap().mean_loss < report.epochs[0].mean_loss);
    }

    #[test]
    fn learning_rate_decays_linearly() {
        let cfg = EmbeddingConfig::default();
        let s = Schedule::new(&cfg, 10);
        assert_eq!(s.rate(0), 0.025);
        assert!((s.rate(200) - (0.025 - (0.025 - 1e-4) * 0.5)).abs() < 1e-15);
        assert!((s.rate(400) - 1e-4).abs() < 1e-15);
    }
}
