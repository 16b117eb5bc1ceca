//! Topic vectors, topic words, document assignment and hierarchical topic
//! reduction.

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterLabeling;
use crate::embedding::{nearest_words, SemanticEmbedding};
use crate::error::{Error, Result};
use crate::linalg::{cosine_top_n, dot, normalized};

/// Words reported per topic unless asked otherwise.
pub const DEFAULT_TOPIC_WORDS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    /// Stable identifier: the cluster label the topic was created from.
    pub id: usize,
    pub vector: Vec<f64>,
    /// Nearest words, most similar first.
    pub words: Vec<(String, f64)>,
    pub size: usize,
    pub member_doc_ids: Vec<String>,
    /// Ids of every topic merged into this one, in merge order.
    pub merged_from: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub absorbed: usize,
    pub absorbing: usize,
    pub absorbed_size: usize,
    pub absorbing_size: usize,
    pub vector: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub topics: Vec<Topic>,
    /// Per document (in embedding order): index into `topics`.
    pub assignment: Vec<usize>,
    pub merge_history: Vec<MergeRecord>,
    pub doc_ids: Vec<String>,
    /// Number of words kept per topic.
    pub n_words: usize,
}

/// One row of the topics export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicSummary {
    pub topic_id: usize,
    pub size: usize,
    pub words: Vec<WordScore>,
    pub merged_from: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordScore {
    pub word: String,
    pub similarity: f64,
}

/// Mean of the non-noise document vectors of each cluster.
pub fn compute_topic_vectors(doc_vectors: ArrayView2<'_, f64>, labeling: &ClusterLabeling) -> Result<Vec<Vec<f64>>> {
    if labeling.len() != doc_vectors.nrows() {
        return Err(Error::InvalidInput(format!(
            "{} labels for {} documents",
            labeling.len(),
            doc_vectors.nrows()
        )));
    }
    if labeling.cluster_count == 0 {
        return Err(Error::InvalidInput("no clusters to build topics from".into()));
    }
    let dim = doc_vectors.ncols();
    let mut sums = vec![vec![0.0; dim]; labeling.cluster_count];
    let mut counts = vec![0usize; labeling.cluster_count];
    for (row, &label) in doc_vectors.outer_iter().zip(&labeling.labels) {
        if label < 0 {
            continue;
        }
        let l = label as usize;
        if l >= labeling.cluster_count {
            return Err(Error::InvalidInput(format!("label {l} out of range")));
        }
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(row) {
            *s += x;
        }
    }
    sums.into_iter()
        .zip(counts)
        .enumerate()
        .map(|(l, (s, c))| {
            if c == 0 {
                Err(Error::InvalidInput(format!("cluster {l} has no members")))
            } else {
                Ok(s.into_iter().map(|x| x / c as f64).collect())
            }
        })
        .collect()
}

pub fn topic_words(topic_vector: &[f64], embedding: &SemanticEmbedding, n: usize) -> Result<Vec<(String, f64)>> {
    nearest_words(embedding, topic_vector, n)
}

/// Nearest topic (by cosine) for every document, lowest index on ties,
/// plus the resulting topic sizes.
pub fn assign_documents(doc_vectors: ArrayView2<'_, f64>, topic_vectors: &[Vec<f64>]) -> Result<(Vec<usize>, Vec<usize>)> {
    if topic_vectors.is_empty() {
        return Err(Error::InvalidInput("at least one topic is required".into()));
    }
    let units = topic_vectors
        .iter()
        .map(|t| {
            if t.len() != doc_vectors.ncols() {
                return Err(Error::InvalidInput("topic and document dimensions differ".into()));
            }
            normalized(t)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<f64>> = doc_vectors.outer_iter().map(|r| r.to_vec()).collect();
    // Dividing by the document norm cannot change the argmax.
    let assignment: Vec<usize> = rows
        .par_iter()
        .map(|doc| {
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (t, u) in units.iter().enumerate() {
                let s = dot(doc, u);
                if s > best_score {
                    best = t;
                    best_score = s;
                }
            }
            best
        })
        .collect();
    let mut sizes = vec![0; topic_vectors.len()];
    for &t in &assignment {
        sizes[t] += 1;
    }
    Ok((assignment, sizes))
}

impl TopicModel {
    /// Builds one topic per cluster: centroid, nearest words and the
    /// documents (noise included) that are closest to it.
    pub fn from_clusters(embedding: &SemanticEmbedding, labeling: &ClusterLabeling, n_words: usize) -> Result<Self> {
        let vectors = compute_topic_vectors(embedding.doc_vectors(), labeling)?;
        let topics = vectors
            .into_iter()
            .enumerate()
            .map(|(id, vector)| Topic {
                id,
                vector,
                words: Vec::new(),
                size: 0,
                member_doc_ids: Vec::new(),
                merged_from: Vec::new(),
            })
            .collect();
        let mut model = TopicModel {
            topics,
            assignment: Vec::new(),
            merge_history: Vec::new(),
            doc_ids: embedding.doc_ids().to_vec(),
            n_words,
        };
        model.reassign(embedding.doc_vectors())?;
        model.refresh_words(embedding)?;
        Ok(model)
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    pub fn topic_vectors(&self) -> Vec<Vec<f64>> {
        self.topics.iter().map(|t| t.vector.clone()).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.topics.iter().map(|t| t.size).collect()
    }

    /// Topic of a document by id.
    pub fn topic_of(&self, doc_id: &str) -> Option<usize> {
        self.doc_ids.iter().position(|d| d == doc_id).map(|i| self.assignment[i])
    }

    fn reassign(&mut self, doc_vectors: ArrayView2<'_, f64>) -> Result<()> {
        let (assignment, sizes) = assign_documents(doc_vectors, &self.topic_vectors())?;
        for (topic, size) in self.topics.iter_mut().zip(sizes) {
            topic.size = size;
            topic.member_doc_ids.clear();
        }
        for (doc, &t) in assignment.iter().enumerate() {
            self.topics[t].member_doc_ids.push(self.doc_ids[doc].clone());
        }
        self.assignment = assignment;
        Ok(())
    }

    fn refresh_words(&mut self, embedding: &SemanticEmbedding) -> Result<()> {
        let n = self.n_words;
        let words = self
            .topics
            .par_iter()
            .map(|t| topic_words(&t.vector, embedding, n))
            .collect::<Result<Vec<_>>>()?;
        for (t, w) in self.topics.iter_mut().zip(words) {
            t.words = w;
        }
        Ok(())
    }

    /// Merges the smallest topic into its nearest neighbour and reassigns
    /// every document. Words are left as they were.
    fn merge_smallest(&mut self, doc_vectors: ArrayView2<'_, f64>) -> Result<()> {
        let s = (0..self.topics.len())
            .min_by_key(|&i| (self.topics[i].size, i))
            .expect("at least two topics");
        let vs = normalized(&self.topics[s].vector)?;
        let mut t = usize::MAX;
        let mut best = f64::NEG_INFINITY;
        for (i, other) in self.topics.iter().enumerate() {
            if i == s {
                continue;
            }
            let sim = dot(&vs, &normalized(&other.vector)?);
            if sim > best {
                best = sim;
                t = i;
            }
        }
        let (ns, nt) = (self.topics[s].size, self.topics[t].size);
        let merged: Vec<f64> = if ns + nt == 0 {
            self.topics[s]
                .vector
                .iter()
                .zip(&self.topics[t].vector)
                .map(|(a, b)| (a + b) / 2.0)
                .collect()
        } else {
            let total = (ns + nt) as f64;
            self.topics[s]
                .vector
                .iter()
                .zip(&self.topics[t].vector)
                .map(|(a, b)| (ns as f64 * a + nt as f64 * b) / total)
                .collect()
        };
        let absorbed = self.topics.remove(s);
        let t = if t > s { t - 1 } else { t };
        self.merge_history.push(MergeRecord {
            absorbed: absorbed.id,
            absorbing: self.topics[t].id,
            absorbed_size: ns,
            absorbing_size: nt,
            vector: merged.clone(),
        });
        let target = &mut self.topics[t];
        target.vector = merged;
        target.merged_from.push(absorbed.id);
        target.merged_from.extend(absorbed.merged_from);
        self.reassign(doc_vectors)
    }

    /// Repeatedly merges the smallest topic into its most similar one until
    /// `target` topics remain.
    pub fn reduce(&self, embedding: &SemanticEmbedding, target: usize) -> Result<TopicModel> {
        if target == 0 || target > self.topics.len() {
            return Err(Error::InvalidInput(format!(
                "cannot reduce {} topics to {target}",
                self.topics.len()
            )));
        }
        if embedding.doc_vectors().nrows() != self.assignment.len() {
            return Err(Error::InvalidInput("embedding does not match the topic model".into()));
        }
        let mut model = self.clone();
        if target == self.topics.len() {
            return Ok(model);
        }
        while model.topics.len() > target {
            model.merge_smallest(embedding.doc_vectors())?;
        }
        model.refresh_words(embedding)?;
        Ok(model)
    }

    /// The same topics described by their `n` nearest words.
    pub fn with_word_count(&self, embedding: &SemanticEmbedding, n: usize) -> Result<TopicModel> {
        let mut model = self.clone();
        model.n_words = n;
        model.refresh_words(embedding)?;
        Ok(model)
    }

    /// Exact top-n topics by cosine similarity to `query`.
    pub fn search_topics(&self, query: &[f64], top_n: usize) -> Result<Vec<(usize, f64)>> {
        if top_n == 0 {
            return Err(Error::InvalidInput("top_n must be at least 1".into()));
        }
        let dim = query.len();
        let flat: Vec<f64> = self.topics.iter().flat_map(|t| t.vector.iter().copied()).collect();
        let rows = ArrayView2::from_shape((self.topics.len(), dim), &flat)
            .map_err(|_| Error::InvalidInput("query dimension does not match topics".into()))?;
        cosine_top_n(rows, query, top_n)
    }

    /// Topics ordered by size (largest first, lower index on ties).
    pub fn summaries(&self) -> Vec<TopicSummary> {
        let mut order: Vec<usize> = (0..self.topics.len()).collect();
        order.sort_by_key(|&i| (std::cmp::Reverse(self.topics[i].size), i));
        order
            .into_iter()
            .map(|i| {
                let t = &self.topics[i];
                TopicSummary {
                    topic_id: t.id,
                    size: t.size,
                    words: t
                        .words
                        .iter()
                        .map(|(w, s)| WordScore {
                            word: w.clone(),
                            similarity: *s,
                        })
                        .collect(),
                    merged_from: t.merged_from.clone(),
                }
            })
            .collect()
    }

    /// Checks the structural invariants: one assignment per document,
    /// sizes and member lists consistent with the assignment.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.topics.is_empty() {
            return bad("topic model has no topics".into());
        }
        if self.assignment.len() != self.doc_ids.len() {
            return bad("assignment length differs from document count".into());
        }
        let mut sizes = vec![0; self.topics.len()];
        for &t in &self.assignment {
            if t >= self.topics.len() {
                return bad(format!("assignment to missing topic {t}"));
            }
            sizes[t] += 1;
        }
        let dim = self.topics[0].vector.len();
        for (i, topic) in self.topics.iter().enumerate() {
            if topic.size != sizes[i] || topic.member_doc_ids.len() != sizes[i] {
                return bad(format!("topic {} size does not match its assignment", topic.id));
            }
            if topic.vector.len() != dim || topic.vector.iter().any(|x| !x.is_finite()) {
                return bad(format!("topic {} has an invalid vector", topic.id));
            }
        }
        Ok(())
    }
}

pub fn reduce_topics(model: &TopicModel, embedding: &SemanticEmbedding, target: usize) -> Result<TopicModel> {
    model.reduce(embedding, target)
}

/// Exact top-n documents by cosine similarity to `query`.
pub fn search_documents(embedding: &SemanticEmbedding, query: &[f64], top_n: usize) -> Result<Vec<(String, f64)>> {
    if top_n == 0 {
        return Err(Error::InvalidInput("top_n must be at least 1".into()));
    }
    Ok(cosine_top_n(embedding.doc_vectors(), query, top_n)?
        .into_iter()
        .map(|(i, s)| (embedding.doc_ids()[i].clone(), s))
        .collect())
}

pub fn search_topics(model: &TopicModel, query: &[f64], top_n: usize) -> Result<Vec<(usize, f64)>> {
    model.search_topics(query, top_n)
}
