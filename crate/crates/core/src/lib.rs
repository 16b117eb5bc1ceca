//! Topic discovery from jointly embedded document and word vectors.
//!
//! The pipeline trains document and word vectors together, reduces the
//! document vectors to a low-dimensional layout, finds dense clusters in
//! that layout, and turns each cluster into a topic vector whose nearest
//! words describe it. Topics can be merged hierarchically, and any topic
//! model (including ones produced elsewhere) can be scored by how much
//! information its topic words carry about their documents.

pub mod clustering;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod linalg;
pub mod metric;
pub mod persistence;
pub mod pipeline;
pub mod reduction;
pub mod synthetic;
pub mod topics;

pub use clustering::{cluster, ClusterConfig, ClusterLabeling, NOISE};
pub use corpus::{build_vocabulary, load_corpus, tokenize, CorpusFormat, Document, Vocabulary};
pub use embedding::{compose_query, train, EmbeddingConfig, SemanticEmbedding, WorkerMode};
pub use error::{Error, Result};
pub use metric::{build_stats, evaluate, load_external_topics, CooccurrenceStats, EvaluationReport, TopicSpec};
pub use persistence::{load_model, save_model, ModelArchive};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineOutput};
pub use reduction::{reduce, Metric, ReductionConfig};
pub use topics::{reduce_topics, search_documents, search_topics, Topic, TopicModel};
