//! Corpus to topics in one call.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::clustering::{cluster, ClusterConfig};
use crate::corpus::Document;
use crate::embedding::{train_with_report, EmbeddingConfig, TrainingReport};
use crate::error::Result;
use crate::persistence::{round_to_f32, to_archive_precision, ModelArchive};
use crate::reduction::{reduce, ReductionConfig};
use crate::topics::{TopicModel, DEFAULT_TOPIC_WORDS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub embedding: EmbeddingConfig,
    pub reduction: ReductionConfig,
    pub clustering: ClusterConfig,
    pub topic_words: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            embedding: EmbeddingConfig::default(),
            reduction: ReductionConfig::default(),
            clustering: ClusterConfig::default(),
            topic_words: DEFAULT_TOPIC_WORDS,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub archive: ModelArchive,
    pub training: TrainingReport,
    /// Wall time per stage, in execution order.
    pub timings: Vec<(&'static str, Duration)>,
}

/// Trains the embedding, reduces and clusters the document vectors and
/// builds one topic per cluster. Stage outputs are rounded to archive
/// precision as they are produced, so the returned archive describes
/// exactly the values later stages saw.
///
/// Errors are tagged with the failing stage.
pub fn run_pipeline(docs: &[Document], config: &PipelineConfig) -> Result<PipelineOutput> {
    let mut timings = Vec::with_capacity(4);
    let mut timed = |stage: &'static str, start: Instant| timings.push((stage, start.elapsed()));

    let start = Instant::now();
    let (embedding, training) = train_with_report(docs, &config.embedding)
        .and_then(|(e, r)| Ok((to_archive_precision(&e)?, r)))
        .map_err(|e| e.in_stage("embedding"))?;
    timed("embedding", start);

    let start = Instant::now();
    let reduced = reduce(embedding.doc_vectors(), &config.reduction)
        .map(|r| round_to_f32(&r))
        .map_err(|e| e.in_stage("reduction"))?;
    timed("reduction", start);

    let start = Instant::now();
    let labeling = cluster(reduced.view(), &config.clustering).map_err(|e| e.in_stage("clustering"))?;
    timed("clustering", start);
    log::info!(
        "found {} clusters ({} noise documents)",
        labeling.cluster_count,
        labeling.noise_count()
    );

    let start = Instant::now();
    let topics =
        TopicModel::from_clusters(&embedding, &labeling, config.topic_words).map_err(|e| e.in_stage("topics"))?;
    timed("topics", start);

    Ok(PipelineOutput {
        archive: ModelArchive {
            embedding_config: config.embedding.clone(),
            reduction_config: config.reduction.clone(),
            cluster_config: config.clustering.clone(),
            embedding,
            reduced,
            labeling,
            topics,
        },
        training,
        timings,
    })
}
