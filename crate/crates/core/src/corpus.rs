//! Corpus ingestion, tokenization and vocabulary construction.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default minimum corpus frequency for a word to be kept.
pub const DEFAULT_MIN_COUNT: u64 = 50;
/// Default frequent-word subsampling threshold.
pub const DEFAULT_SUBSAMPLE_THRESHOLD: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub raw: String,
    /// Vocabulary indices, filled by [`Vocabulary::index_documents`].
    pub tokens: Vec<u32>,
}

impl Document {
    pub fn new(id: impl Into<String>, raw: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            raw: raw.into(),
            tokens: Vec::new(),
        }
    }
}

/// Lowercased alphanumeric runs of `raw`, in order.
///
/// Everything that is not alphanumeric separates tokens. There is no
/// stop-word removal, stemming or lemmatization.
pub fn tokenize(raw: &str) -> Vec<String> {
    // Lowercase first: some lowercase mappings emit non-alphanumeric marks.
    raw.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Probability of keeping an occurrence of a word whose corpus frequency
/// ratio is `frequency_ratio`: `min(1, sqrt(threshold / frequency_ratio))`.
pub fn subsample_keep_probability(frequency_ratio: f64, threshold: f64) -> Result<f64> {
    if !(frequency_ratio > 0.0 && frequency_ratio <= 1.0) {
        return Err(Error::Domain(format!(
            "word frequency ratio must lie in (0, 1], got {frequency_ratio}"
        )));
    }
    if !(threshold > 0.0) {
        return Err(Error::Domain(format!(
            "subsample threshold must be positive, got {threshold}"
        )));
    }
    Ok((threshold / frequency_ratio).sqrt().min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyData", into = "VocabularyData")]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    keep_probability: Vec<f64>,
    total_tokens: u64,
    min_count: u64,
    subsample_threshold: f64,
    index: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyData {
    words: Vec<String>,
    counts: Vec<u64>,
    total_tokens: u64,
    min_count: u64,
    subsample_threshold: f64,
}

impl From<Vocabulary> for VocabularyData {
    fn from(v: Vocabulary) -> Self {
        VocabularyData {
            words: v.words,
            counts: v.counts,
            total_tokens: v.total_tokens,
            min_count: v.min_count,
            subsample_threshold: v.subsample_threshold,
        }
    }
}

impl TryFrom<VocabularyData> for Vocabulary {
    type Error = Error;

    fn try_from(d: VocabularyData) -> Result<Self> {
        Vocabulary::from_counts(
            d.words.into_iter().zip(d.counts),
            d.total_tokens,
            d.min_count,
            d.subsample_threshold,
        )
    }
}

impl Vocabulary {
    /// Builds a vocabulary from already filtered `(word, count)` pairs.
    ///
    /// The pairs are re-sorted into canonical order (descending count, then
    /// by string). `total_tokens` is the raw token count of the corpus,
    /// including discarded words.
    pub fn from_counts(
        counts: impl IntoIterator<Item = (String, u64)>,
        total_tokens: u64,
        min_count: u64,
        subsample_threshold: f64,
    ) -> Result<Self> {
        if min_count == 0 {
            return Err(Error::InvalidConfig("min_count must be at least 1".into()));
        }
        let mut pairs: Vec<(String, u64)> = counts.into_iter().collect();
        if pairs.is_empty() {
            return Err(Error::EmptyVocabulary { min_count });
        }
        pairs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let retained: u64 = pairs.iter().map(|p| p.1).sum();
        if retained > total_tokens {
            return Err(Error::InvalidInput(format!(
                "retained word counts ({retained}) exceed total tokens ({total_tokens})"
            )));
        }
        let mut index = HashMap::with_capacity(pairs.len());
        let mut keep_probability = Vec::with_capacity(pairs.len());
        for (i, (word, count)) in pairs.iter().enumerate() {
            if *count < min_count {
                return Err(Error::InvalidInput(format!(
                    "word {word:?} has count {count} below min_count {min_count}"
                )));
            }
            if index.insert(word.clone(), i as u32).is_some() {
                return Err(Error::InvalidInput(format!("duplicate word {word:?}")));
            }
            let ratio = *count as f64 / total_tokens as f64;
            keep_probability.push(subsample_keep_probability(ratio, subsample_threshold)?);
        }
        let (words, counts) = pairs.into_iter().unzip();
        Ok(Vocabulary {
            words,
            counts,
            keep_probability,
            total_tokens,
            min_count,
            subsample_threshold,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn word(&self, idx: u32) -> Option<&str> {
        self.words.get(idx as usize).map(String::as_str)
    }

    pub fn count(&self, idx: u32) -> u64 {
        self.counts[idx as usize]
    }

    pub fn index_of(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn keep_probability(&self, idx: u32) -> f64 {
        self.keep_probability[idx as usize]
    }

    pub fn keep_probabilities(&self) -> &[f64] {
        &self.keep_probability
    }

    /// Raw token count of the corpus, discarded words included.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// Tokens dropped because their word fell below `min_count`.
    pub fn discarded_tokens(&self) -> u64 {
        self.total_tokens - self.counts.iter().sum::<u64>()
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn subsample_threshold(&self) -> f64 {
        self.subsample_threshold
    }

    /// Tokenizes `raw` and maps it to vocabulary indices, skipping
    /// out-of-vocabulary words.
    pub fn encode(&self, raw: &str) -> Vec<u32> {
        tokenize(raw)
            .iter()
            .filter_map(|t| self.index_of(t))
            .collect()
    }

    pub fn index_documents(&self, docs: &mut [Document]) {
        for doc in docs {
            doc.tokens = self.encode(&doc.raw);
        }
    }

    /// Resolves words to indices, listing every word that is missing.
    pub fn lookup_all<S: AsRef<str>>(&self, words: &[S]) -> Result<Vec<u32>> {
        let mut missing = Vec::new();
        let mut out = Vec::with_capacity(words.len());
        for w in words {
            match self.index_of(w.as_ref()) {
                Some(i) => out.push(i),
                None => missing.push(w.as_ref().to_owned()),
            }
        }
        if missing.is_empty() {
            Ok(out)
        } else {
            Err(Error::UnknownWords(missing))
        }
    }
}

/// Counts words over the tokenized documents and keeps those with at least
/// `min_count` occurrences.
pub fn build_vocabulary(docs: &[Document], min_count: u64, subsample_threshold: f64) -> Result<Vocabulary> {
    if min_count == 0 {
        return Err(Error::InvalidConfig("min_count must be at least 1".into()));
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    let mut total = 0u64;
    for doc in docs {
        for tok in tokenize(&doc.raw) {
            total += 1;
            *counts.entry(tok).or_insert(0) += 1;
        }
    }
    let kept = counts.into_iter().filter(|(_, c)| *c >= min_count);
    Vocabulary::from_counts(kept, total, min_count, subsample_threshold)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    /// One JSON object per line with `text` and an optional `id`.
    #[default]
    Jsonl,
    /// One document per line.
    Plain,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "plain" | "txt" => Ok(CorpusFormat::Plain),
            other => Err(Error::InvalidConfig(format!("unknown corpus format {other:?}"))),
        }
    }
}

#[derive(Deserialize)]
struct JsonRecord {
    id: Option<String>,
    text: String,
}

/// Reads a UTF-8 corpus file. Documents without an id get their zero-based
/// line number.
pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&content, format, path)
}

pub(crate) fn parse_corpus(content: &str, format: CorpusFormat, path: &Path) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in content.lines().enumerate() {
        let doc = match format {
            CorpusFormat::Plain => Document::new(lineno.to_string(), line),
            CorpusFormat::Jsonl => {
                if line.trim().is_empty() {
                    continue;
                }
                let rec: JsonRecord = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
                    path: path.to_owned(),
                    line: lineno + 1,
                    message: e.to_string(),
                })?;
                Document::new(rec.id.unwrap_or_else(|| lineno.to_string()), rec.text)
            }
        };
        if !seen.insert(doc.id.clone()) {
            return Err(Error::DuplicateId {
                id: doc.id,
                line: lineno + 1,
            });
        }
        docs.push(doc);
    }
    Ok(docs)
}
