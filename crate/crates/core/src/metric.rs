//! Probability-weighted information (PWI) of topic models.
//!
//! Document/word probabilities are token proportions over the training
//! vocabulary. A topic earns `P(d|w) * PMI(d, w)` for each of its words
//! and each of its documents; mixtures weight documents by their topic
//! proportion.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Vocabulary};
use crate::error::{Error, Result};
use crate::topics::TopicModel;

pub const DEFAULT_LOG_BASE: f64 = 2.0;
/// Allowed deviation of a mixture row sum from 1.
pub const PROPORTION_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct CooccurrenceStats {
    doc_ids: Vec<String>,
    doc_index: HashMap<String, usize>,
    words: Vec<String>,
    /// Per document: word -> count.
    joint: Vec<BTreeMap<u32, u64>>,
    doc_counts: Vec<u64>,
    word_counts: Vec<u64>,
    total: u64,
    log_base: f64,
}

/// Counts in-vocabulary tokens of every document.
pub fn build_stats(docs: &[Document], vocab: &Vocabulary) -> Result<CooccurrenceStats> {
    if docs.is_empty() {
        return Err(Error::InvalidInput("cannot build statistics for an empty corpus".into()));
    }
    let mut doc_index = HashMap::with_capacity(docs.len());
    let mut joint = Vec::with_capacity(docs.len());
    let mut doc_counts = Vec::with_capacity(docs.len());
    let mut word_counts = vec![0u64; vocab.len()];
    for (i, doc) in docs.iter().enumerate() {
        if doc_index.insert(doc.id.clone(), i).is_some() {
            return Err(Error::DuplicateId {
                id: doc.id.clone(),
                line: i + 1,
            });
        }
        let mut counts = BTreeMap::new();
        let tokens = vocab.encode(&doc.raw);
        for &w in &tokens {
            *counts.entry(w).or_insert(0u64) += 1;
            word_counts[w as usize] += 1;
        }
        doc_counts.push(tokens.len() as u64);
        joint.push(counts);
    }
    let total: u64 = doc_counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidInput("corpus has no in-vocabulary tokens".into()));
    }
    Ok(CooccurrenceStats {
        doc_ids: docs.iter().map(|d| d.id.clone()).collect(),
        doc_index,
        words: vocab.words().to_vec(),
        joint,
        doc_counts,
        word_counts,
        total,
        log_base: DEFAULT_LOG_BASE,
    })
}

impl CooccurrenceStats {
    pub fn with_log_base(mut self, base: f64) -> Result<Self> {
        if !(base > 0.0 && base != 1.0 && base.is_finite()) {
            return Err(Error::InvalidConfig(format!("invalid log base {base}")));
        }
        self.log_base = base;
        Ok(self)
    }

    pub fn log_base(&self) -> f64 {
        self.log_base
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn n_words(&self) -> usize {
        self.words.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_index(&self, id: &str) -> Option<usize> {
        self.doc_index.get(id).copied()
    }

    pub fn word(&self, w: u32) -> &str {
        &self.words[w as usize]
    }

    pub fn total_tokens(&self) -> u64 {
        self.total
    }

    pub fn count(&self, d: usize, w: u32) -> u64 {
        self.joint[d].get(&w).copied().unwrap_or(0)
    }

    /// Words occurring in document `d` with their counts.
    pub fn doc_words(&self, d: usize) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.joint[d].iter().map(|(&w, &c)| (w, c))
    }

    pub fn joint(&self, d: usize, w: u32) -> f64 {
        self.count(d, w) as f64 / self.total as f64
    }

    pub fn doc_marginal(&self, d: usize) -> f64 {
        self.doc_counts[d] as f64 / self.total as f64
    }

    pub fn word_marginal(&self, w: u32) -> f64 {
        self.word_counts[w as usize] as f64 / self.total as f64
    }

    /// `P(d|w)`, or 0 for a word that never occurs.
    pub fn conditional(&self, d: usize, w: u32) -> f64 {
        let cw = self.word_counts[w as usize];
        if cw == 0 {
            0.0
        } else {
            self.count(d, w) as f64 / cw as f64
        }
    }

    /// `log(P(d,w) / (P(d) P(w)))`; `None` when `P(d,w) = 0`.
    pub fn pmi(&self, d: usize, w: u32) -> Option<f64> {
        let c = self.count(d, w);
        if c == 0 {
            return None;
        }
        let ratio = (c as f64 * self.total as f64) / (self.doc_counts[d] as f64 * self.word_counts[w as usize] as f64);
        Some(ratio.ln() / self.log_base.ln())
    }

    /// `P(d|w) * PMI(d, w)`, 0 when the pair never co-occurs.
    fn gain(&self, d: usize, w: u32) -> f64 {
        self.pmi(d, w).map_or(0.0, |pmi| self.conditional(d, w) * pmi)
    }
}

/// `P(d,w) * PMI(d,w)`, 0 when `P(d,w) = 0`.
pub fn pointwise_pwi(stats: &CooccurrenceStats, d: usize, w: u32) -> f64 {
    stats.pmi(d, w).map_or(0.0, |pmi| stats.joint(d, w) * pmi)
}

/// Mutual information between documents and words.
pub fn mutual_information(stats: &CooccurrenceStats) -> f64 {
    (0..stats.n_docs())
        .map(|d| stats.doc_words(d).map(|(w, _)| pointwise_pwi(stats, d, w)).sum::<f64>())
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Membership {
    /// Documents of each topic; together they must partition the corpus.
    Hard(Vec<Vec<usize>>),
    /// Per document, the proportion of each topic.
    Mixture(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicSpec {
    /// Topic words, best first.
    pub topics: Vec<Vec<u32>>,
    pub membership: Membership,
}

impl TopicSpec {
    /// Hard spec from a topic model: its topic words and document assignment.
    pub fn from_model(model: &TopicModel, stats: &CooccurrenceStats, vocab: &Vocabulary) -> Result<Self> {
        let topics = model
            .topics
            .iter()
            .map(|t| vocab.lookup_all(&t.words.iter().map(|w| w.0.as_str()).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?;
        let mut members = vec![Vec::new(); model.topics.len()];
        let mut missing = Vec::new();
        for (id, &t) in model.doc_ids.iter().zip(&model.assignment) {
            match stats.doc_index(id) {
                Some(d) => members[t].push(d),
                None => missing.push(id.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::UnknownDocuments(missing));
        }
        Ok(TopicSpec {
            topics,
            membership: Membership::Hard(members),
        })
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    fn check_words(&self, stats: &CooccurrenceStats) -> Result<()> {
        for words in &self.topics {
            if let Some(w) = words.iter().find(|&&w| w as usize >= stats.n_words()) {
                return Err(Error::InvalidInput(format!("word index {w} outside the vocabulary")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicScore {
    pub topic_id: usize,
    pub words: Vec<String>,
    pub pwi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub per_topic: Vec<TopicScore>,
    pub total: f64,
    /// Words per topic.
    pub n: usize,
    /// Number of topics.
    pub k: usize,
    pub log_base: f64,
}

impl EvaluationReport {
    fn new(spec: &TopicSpec, stats: &CooccurrenceStats, scores: Vec<f64>) -> Self {
        let per_topic: Vec<TopicScore> = spec
            .topics
            .iter()
            .zip(scores)
            .enumerate()
            .map(|(t, (words, pwi))| TopicScore {
                topic_id: t,
                words: words.iter().map(|&w| stats.word(w).to_owned()).collect(),
                pwi,
            })
            .collect();
        EvaluationReport {
            total: per_topic.iter().map(|s| s.pwi).sum(),
            n: spec.topics.iter().map(Vec::len).max().unwrap_or(0),
            k: spec.topics.len(),
            log_base: stats.log_base(),
            per_topic,
        }
    }

    /// `topic_id,words,pwi` rows (words space-separated) and a final
    /// `total` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("topic_id,words,pwi\n");
        for s in &self.per_topic {
            let _ = writeln!(out, "{},{},{}", s.topic_id, s.words.join(" "), s.pwi);
        }
        let _ = writeln!(out, "total,,{}", self.total);
        out
    }
}

/// Hard-assignment PWI: for each topic, the sum over its documents and
/// words of `P(d|w) * PMI(d, w)`.
pub fn pwi_hard(spec: &TopicSpec, stats: &CooccurrenceStats) -> Result<EvaluationReport> {
    let Membership::Hard(members) = &spec.membership else {
        return Err(Error::InvalidInput("pwi_hard needs a hard assignment".into()));
    };
    if members.len() != spec.topics.len() {
        return Err(Error::InvalidInput("one document set per topic is required".into()));
    }
    spec.check_words(stats)?;
    let mut seen = vec![false; stats.n_docs()];
    for &d in members.iter().flatten() {
        if d >= stats.n_docs() {
            return Err(Error::InvalidInput(format!("document index {d} out of range")));
        }
        if std::mem::replace(&mut seen[d], true) {
            return Err(Error::InvalidInput(format!(
                "document {} belongs to more than one topic",
                stats.doc_ids()[d]
            )));
        }
    }
    if let Some(d) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidInput(format!(
            "document {} is not assigned to any topic",
            stats.doc_ids()[d]
        )));
    }
    let scores = spec
        .topics
        .par_iter()
        .zip(members)
        .map(|(words, docs)| {
            docs.iter()
                .map(|&d| words.iter().map(|&w| stats.gain(d, w)).sum::<f64>())
                .sum()
        })
        .collect();
    Ok(EvaluationReport::new(spec, stats, scores))
}

/// Mixture PWI: like [`pwi_hard`], summed over every document and weighted
/// by the document's topic proportion.
pub fn pwi_mixture(spec: &TopicSpec, stats: &CooccurrenceStats) -> Result<EvaluationReport> {
    let Membership::Mixture(props) = &spec.membership else {
        return Err(Error::InvalidInput("pwi_mixture needs topic proportions".into()));
    };
    if props.len() != stats.n_docs() {
        return Err(Error::InvalidInput(format!(
            "{} proportion rows for {} documents",
            props.len(),
            stats.n_docs()
        )));
    }
    spec.check_words(stats)?;
    let k = spec.topics.len();
    for (d, row) in props.iter().enumerate() {
        check_proportions(row, k).map_err(|m| {
            Error::InvalidInput(format!("document {}: {m}", stats.doc_ids()[d]))
        })?;
    }
    let scores = spec
        .topics
        .par_iter()
        .enumerate()
        .map(|(t, words)| {
            props
                .iter()
                .enumerate()
                .filter(|(_, row)| row[t] > 0.0)
                .map(|(d, row)| row[t] * words.iter().map(|&w| stats.gain(d, w)).sum::<f64>())
                .sum()
        })
        .collect();
    Ok(EvaluationReport::new(spec, stats, scores))
}

fn check_proportions(row: &[f64], k: usize) -> std::result::Result<(), String> {
    if row.len() != k {
        return Err(format!("expected {k} proportions, found {}", row.len()));
    }
    if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err("proportions must be finite and non-negative".into());
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > PROPORTION_TOLERANCE {
        return Err(format!("proportions sum to {sum}, not 1"));
    }
    Ok(())
}

/// Scores `spec` using each topic's first `n` words. Topics with fewer
/// words are scored with what they have, with a warning.
pub fn evaluate(spec: &TopicSpec, stats: &CooccurrenceStats, n: usize) -> Result<EvaluationReport> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let shortest = spec.topics.iter().map(Vec::len).min().unwrap_or(0);
    if shortest < n {
        log::warn!("only {shortest} words available for some topics; clamping n = {n}");
    }
    let truncated = TopicSpec {
        topics: spec.topics.iter().map(|w| w[..w.len().min(n)].to_vec()).collect(),
        membership: spec.membership.clone(),
    };
    match truncated.membership {
        Membership::Hard(_) => pwi_hard(&truncated, stats),
        Membership::Mixture(_) => pwi_mixture(&truncated, stats),
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "lowercase")]
enum ExternalMode {
    Hard,
    Mixture,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExternalTopic {
    words: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExternalTopics {
    mode: ExternalMode,
    topics: Vec<ExternalTopic>,
    assignments: Option<BTreeMap<String, usize>>,
    proportions: Option<BTreeMap<String, Vec<f64>>>,
}

/// Reads a topic model produced elsewhere.
///
/// ```json
/// {"mode": "hard", "topics": [{"words": ["a", "b"]}], "assignments": {"doc1": 0}}
/// {"mode": "mixture", "topics": [...], "proportions": {"doc1": [0.2, 0.8]}}
/// ```
///
/// Words must be in the vocabulary and documents in `stats`; every topic
/// needs the same number of words.
pub fn load_external_topics(path: impl AsRef<Path>, vocab: &Vocabulary, stats: &CooccurrenceStats) -> Result<TopicSpec> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_external_topics(&content, path, vocab, stats)
}

pub(crate) fn parse_external_topics(
    content: &str,
    path: &Path,
    vocab: &Vocabulary,
    stats: &CooccurrenceStats,
) -> Result<TopicSpec> {
    let schema = |message: String| Error::Schema {
        path: path.to_path_buf(),
        message,
    };
    let raw: ExternalTopics = serde_json::from_str(content).map_err(|e| schema(e.to_string()))?;
    if raw.topics.is_empty() {
        return Err(schema("\"topics\" is empty".into()));
    }
    let n = raw.topics[0].words.len();
    if n == 0 {
        return Err(schema("topics[0].words is empty".into()));
    }
    if let Some(i) = raw.topics.iter().position(|t| t.words.len() != n) {
        return Err(schema(format!(
            "topics[{i}] has {} words, topics[0] has {n}",
            raw.topics[i].words.len()
        )));
    }
    let all_words: Vec<&str> = raw.topics.iter().flat_map(|t| t.words.iter().map(String::as_str)).collect();
    let ids = vocab.lookup_all(&all_words)?;
    let topics: Vec<Vec<u32>> = ids.chunks(n).map(<[u32]>::to_vec).collect();
    let k = topics.len();

    let resolve = |keys: Vec<&String>| -> Result<Vec<usize>> {
        let mut unknown = Vec::new();
        let idx = keys
            .into_iter()
            .filter_map(|id| {
                let d = stats.doc_index(id);
                if d.is_none() {
                    unknown.push(id.clone());
                }
                d
            })
            .collect();
        if unknown.is_empty() {
            Ok(idx)
        } else {
            Err(Error::UnknownDocuments(unknown))
        }
    };
    let membership = match raw.mode {
        ExternalMode::Hard => {
            let assignments = raw
                .assignments
                .ok_or_else(|| schema("hard mode requires \"assignments\"".into()))?;
            if raw.proportions.is_some() {
                return Err(schema("hard mode does not take \"proportions\"".into()));
            }
            let docs = resolve(assignments.keys().collect())?;
            let mut members = vec![Vec::new(); k];
            for (d, (id, &t)) in docs.into_iter().zip(&assignments) {
                if t >= k {
                    return Err(schema(format!("assignments.{id}: topic {t} out of range 0..{k}")));
                }
                members[t].push(d);
            }
            let covered: HashSet<usize> = members.iter().flatten().copied().collect();
            if covered.len() != stats.n_docs() {
                return Err(schema(format!(
                    "assignments cover {} of {} documents",
                    covered.len(),
                    stats.n_docs()
                )));
            }
            for m in &mut members {
                m.sort_unstable();
            }
            Membership::Hard(members)
        }
        ExternalMode::Mixture => {
            let proportions = raw
                .proportions
                .ok_or_else(|| schema("mixture mode requires \"proportions\"".into()))?;
            if raw.assignments.is_some() {
                return Err(schema("mixture mode does not take \"assignments\"".into()));
            }
            let docs = resolve(proportions.keys().collect())?;
            if docs.len() != stats.n_docs() {
                return Err(schema(format!(
                    "proportions cover {} of {} documents",
                    docs.len(),
                    stats.n_docs()
                )));
            }
            let mut rows = vec![Vec::new(); stats.n_docs()];
            for (d, (id, row)) in docs.into_iter().zip(proportions) {
                check_proportions(&row, k).map_err(|m| schema(format!("proportions.{id}: {m}")))?;
                rows[d] = row;
            }
            Membership::Mixture(rows)
        }
    };
    Ok(TopicSpec { topics, membership })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn corpus(texts: &[&str]) -> (Vec<Document>, Vocabulary) {
        let docs: Vec<Document> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document::new(format!("d{}", i + 1), *t))
            .collect();
        let vocab = crate::corpus::build_vocabulary(&docs, 1, 1e-5).unwrap();
        (docs, vocab)
    }

    fn hand() -> (CooccurrenceStats, Vocabulary) {
        let (docs, vocab) = corpus(&["a a b", "b c c"]);
        (build_stats(&docs, &vocab).unwrap(), vocab)
    }

    fn w(vocab: &Vocabulary, s: &str) -> u32 {
        vocab.index_of(s).unwrap()
    }

    #[test]
    fn hand_counts() {
        let (s, v) = hand();
        assert_eq!(s.doc_marginal(0), 0.5);
        assert!((s.word_marginal(w(&v, "a")) - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.joint(0, w(&v, "a")) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.conditional(0, w(&v, "a")), 1.0);
        assert!((pointwise_pwi(&s, 0, w(&v, "a")) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.pmi(0, w(&v, "b")), Some(0.0));
        assert_eq!(pointwise_pwi(&s, 1, w(&v, "a")), 0.0);
    }

    #[test]
    fn hand_hard_topics() {
        let (s, v) = hand();
        let spec = TopicSpec {
            topics: vec![vec![w(&v, "a")], vec![w(&v, "c")]],
            membership: Membership::Hard(vec![vec![0], vec![1]]),
        };
        let r = pwi_hard(&spec, &s).unwrap();
        assert_eq!(r.per_topic[0].pwi, 1.0);
        assert_eq!(r.per_topic[1].pwi, 1.0);
        assert_eq!(r.total, 2.0);
        assert_eq!((r.n, r.k), (1, 2));
        assert!(r.to_csv().ends_with("total,,2\n"));
    }

    #[test]
    fn natural_log_base() {
        let (s, v) = hand();
        let s = s.with_log_base(std::f64::consts::E).unwrap();
        assert!((s.pmi(0, w(&v, "a")).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(s.clone().with_log_base(1.0).is_err());
    }

    #[test]
    fn mutual_information_cases() {
        let (docs, vocab) = corpus(&["a b c d"]);
        assert_eq!(mutual_information(&build_stats(&docs, &vocab).unwrap()), 0.0);
        let (docs, vocab) = corpus(&["a b c", "d e f"]);
        assert!((mutual_information(&build_stats(&docs, &vocab).unwrap()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn partition_is_enforced() {
        let (s, v) = hand();
        let a = w(&v, "a");
        let overlap = TopicSpec {
            topics: vec![vec![a], vec![a]],
            membership: Membership::Hard(vec![vec![0, 1], vec![1]]),
        };
        assert!(pwi_hard(&overlap, &s).is_err());
        let uncovered = TopicSpec {
            topics: vec![vec![a]],
            membership: Membership::Hard(vec![vec![0]]),
        };
        assert!(pwi_hard(&uncovered, &s).is_err());
    }

    #[test]
    fn mixture_rows_must_sum_to_one() {
        let (s, v) = hand();
        let spec = TopicSpec {
            topics: vec![vec![w(&v, "a")], vec![w(&v, "c")]],
            membership: Membership::Mixture(vec![vec![0.5, 0.4], vec![0.5, 0.5]]),
        };
        assert!(pwi_mixture(&spec, &s).is_err());
    }

    #[test]
    fn uniform_word_adds_nothing() {
        let (docs, vocab) = corpus(&["a a u x", "b u y z", "c c c u"]);
        let s = build_stats(&docs, &vocab).unwrap();
        let u = w(&vocab, "u");
        let base = TopicSpec {
            topics: vec![vec![w(&vocab, "a")], vec![w(&vocab, "c"), w(&vocab, "y")]],
            membership: Membership::Hard(vec![vec![0], vec![1, 2]]),
        };
        let mut with_u = base.clone();
        for t in &mut with_u.topics {
            t.push(u);
        }
        let d = pwi_hard(&with_u, &s).unwrap().total - pwi_hard(&base, &s).unwrap().total;
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn evaluate_truncates_and_clamps() {
        let (s, v) = hand();
        let spec = TopicSpec {
            topics: vec![vec![w(&v, "a"), w(&v, "b")], vec![w(&v, "c"), w(&v, "b")]],
            membership: Membership::Hard(vec![vec![0], vec![1]]),
        };
        let r = evaluate(&spec, &s, 1).unwrap();
        assert_eq!(r.total, 2.0);
        assert_eq!(r.n, 1);
        assert_eq!(evaluate(&spec, &s, 10).unwrap().n, 2);
        assert!(evaluate(&spec, &s, 0).is_err());
    }

    #[test]
    fn external_topics_parse() {
        let (s, v) = hand();
        let p = Path::new("ext.json");
        let hard = r#"{"mode":"hard","topics":[{"words":["a"]},{"words":["c"]}],"assignments":{"d1":0,"d2":1}}"#;
        let spec = parse_external_topics(hard, p, &v, &s).unwrap();
        assert_eq!(spec.membership, Membership::Hard(vec![vec![0], vec![1]]));
        assert_eq!(evaluate(&spec, &s, 10).unwrap().total, 2.0);

        let mix = r#"{"mode":"mixture","topics":[{"words":["a"]},{"words":["c"]}],
            "proportions":{"d1":[1.0,0.0],"d2":[0.0,1.0]}}"#;
        let spec = parse_external_topics(mix, p, &v, &s).unwrap();
        assert_eq!(evaluate(&spec, &s, 10).unwrap().total, 2.0);

        let bad_sum = mix.replace("[1.0,0.0]", "[0.6,0.3]");
        assert!(matches!(parse_external_topics(&bad_sum, p, &v, &s), Err(Error::Schema { .. })));
        let unknown = hard.replace("\"c\"", "\"zzz\"");
        assert!(matches!(
            parse_external_topics(&unknown, p, &v, &s),
            Err(Error::UnknownWords(w)) if w == ["zzz"]
        ));
        let ragged = hard.replace("[\"a\"]", "[\"a\",\"b\"]");
        assert!(matches!(parse_external_topics(&ragged, p, &v, &s), Err(Error::Schema { .. })));
        let missing_doc = hard.replace(",\"d2\":1", "");
        assert!(parse_external_topics(&missing_doc, p, &v, &s).is_err());
        let stray_doc = hard.replace("\"d2\"", "\"d9\"");
        assert!(matches!(
            parse_external_topics(&stray_doc, p, &v, &s),
            Err(Error::UnknownDocuments(_))
        ));
        let broken = "{\"mode\":\"hard\",\n \"topics\": 3}";
        match parse_external_topics(broken, p, &v, &s) {
            Err(Error::Schema { message, .. }) => assert!(message.contains("line 2"), "{message}"),
            other => panic!("{other:?}"),
        }
    }

    /// Probabilities recomputed from raw text by a separate counting pass.
    fn oracle_total(texts: &[String], topics: &[Vec<String>], weight: impl Fn(usize, usize) -> f64) -> f64 {
        let docs: Vec<Vec<String>> = texts.iter().map(|t| crate::corpus::tokenize(t)).collect();
        let total: f64 = docs.iter().map(|d| d.len() as f64).sum();
        let mut sum = 0.0;
        for (t, words) in topics.iter().enumerate() {
            for (d, doc) in docs.iter().enumerate() {
                let wt = weight(t, d);
                for word in words {
                    let c_dw = doc.iter().filter(|x| *x == word).count() as f64;
                    if c_dw == 0.0 {
                        continue;
                    }
                    let c_w: f64 = docs.iter().map(|x| x.iter().filter(|y| *y == word).count() as f64).sum();
                    let p_dw = c_dw / total;
                    let p_d = doc.len() as f64 / total;
                    let p_w = c_w / total;
                    sum += wt * (p_dw / p_w) * (p_dw / (p_d * p_w)).log2();
                }
            }
        }
        sum
    }

    fn random_case(seed: u64) -> (Vec<String>, Vec<Vec<String>>, Vec<usize>, Vec<Vec<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_docs = rng.random_range(1..=20);
        let v = rng.random_range(1..=50);
        let texts: Vec<String> = (0..n_docs)
            .map(|_| {
                (0..rng.random_range(1..15))
                    .map(|_| format!("w{}", rng.random_range(0..v)))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        let k = rng.random_range(1..=4);
        let topics = (0..k)
            .map(|_| (0..3).map(|_| format!("w{}", rng.random_range(0..v))).collect())
            .collect();
        let hard = (0..n_docs).map(|_| rng.random_range(0..k)).collect();
        let mix = (0..n_docs)
            .map(|_| {
                let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / s).collect()
            })
            .collect();
        (texts, topics, hard, mix)
    }

    proptest! {
        #[test]
        fn matches_counting_oracle(seed in 0u64..10_000) {
            let (texts, topic_words, hard, mix) = random_case(seed);
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let (docs, vocab) = corpus(&refs);
            let stats = build_stats(&docs, &vocab).unwrap();
            // Topic words drawn from the range may not occur in the corpus.
            let known: Vec<Vec<String>> = topic_words
                .iter()
                .map(|ws| ws.iter().filter(|w| vocab.index_of(w).is_some()).cloned().collect())
                .collect();
            let topics: Vec<Vec<u32>> = known.iter().map(|ws| vocab.lookup_all(ws).unwrap()).collect();
            let k = topics.len();
            let mut members = vec![Vec::new(); k];
            for (d, &t) in hard.iter().enumerate() {
                members[t].push(d);
            }
            let spec = TopicSpec { topics: topics.clone(), membership: Membership::Hard(members) };
            let got = pwi_hard(&spec, &stats).unwrap().total;
            let want = oracle_total(&texts, &known, |t, d| f64::from(hard[d] == t));
            prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0));

            let spec = TopicSpec { topics, membership: Membership::Mixture(mix.clone()) };
            let got = pwi_mixture(&spec, &stats).unwrap().total;
            let want = oracle_total(&texts, &known, |t, d| mix[d][t]);
            prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0));

            let sum_p: f64 = (0..stats.n_docs()).map(|d| stats.doc_marginal(d)).sum();
            prop_assert!((sum_p - 1.0).abs() < 1e-9);
            let sum_w: f64 = (0..stats.n_words() as u32).map(|w| stats.word_marginal(w)).sum();
            prop_assert!((sum_w - 1.0).abs() < 1e-9);
            let mi = mutual_information(&stats);
            prop_assert!(mi >= -1e-12);
        }
    }
}
