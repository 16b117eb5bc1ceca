//! Single-file model archives.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "TPFG" | u32 version | u64 header length | JSON header | f32 blocks
//! ```
//!
//! The header carries the configs, vocabulary, document ids, cluster labels
//! and topic model, plus the name and shape of every matrix block and a
//! SHA-256 digest of the block payload. Matrices are stored row-major as
//! 32-bit floats, so an archive holds its matrices at f32 precision; use
//! [`to_archive_precision`] before building one so that in-memory state and
//! stored state agree bit for bit.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clustering::{ClusterConfig, ClusterLabeling};
use crate::corpus::Vocabulary;
use crate::embedding::{EmbeddingConfig, SemanticEmbedding};
use crate::error::{Error, Result};
use crate::reduction::ReductionConfig;
use crate::topics::TopicModel;

pub const MAGIC: &[u8; 4] = b"TPFG";
pub const FORMAT_VERSION: u32 = 1;

const PREAMBLE: usize = 4 + 4 + 8;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelArchive {
    pub embedding_config: EmbeddingConfig,
    pub reduction_config: ReductionConfig,
    pub cluster_config: ClusterConfig,
    pub embedding: SemanticEmbedding,
    /// Reduced document coordinates, one row per document.
    pub reduced: Array2<f64>,
    pub labeling: ClusterLabeling,
    pub topics: TopicModel,
}

#[derive(Serialize, Deserialize)]
struct BlockInfo {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    embedding_config: EmbeddingConfig,
    reduction_config: ReductionConfig,
    cluster_config: ClusterConfig,
    vocabulary: Vocabulary,
    doc_ids: Vec<String>,
    labeling: ClusterLabeling,
    topics: TopicModel,
    blocks: Vec<BlockInfo>,
    payload_sha256: String,
}

const BLOCKS: [&str; 4] = ["doc_vectors", "word_vectors", "inner_node_vectors", "reduced"];

/// Rounds every entry through f32.
pub fn round_to_f32(m: &Array2<f64>) -> Array2<f64> {
    m.mapv(|x| x as f32 as f64)
}

/// The embedding with all matrices rounded to the precision they are
/// stored at.
pub fn to_archive_precision(embedding: &SemanticEmbedding) -> Result<SemanticEmbedding> {
    SemanticEmbedding::from_parts(
        embedding.vocabulary().clone(),
        embedding.doc_ids().to_vec(),
        round_to_f32(&embedding.doc_vectors().to_owned()),
        round_to_f32(&embedding.word_vectors().to_owned()),
        round_to_f32(embedding.coding().inner_node_vectors()),
    )
}

impl ModelArchive {
    /// Cross-checks the parts against each other.
    pub fn validate(&self) -> Result<()> {
        let n = self.embedding.doc_ids().len();
        self.embedding_config.validate()?;
        self.cluster_config.validate()?;
        self.labeling.validate()?;
        self.topics.validate()?;
        let bad = |m: &str| Err(Error::InvalidInput(m.to_owned()));
        if self.reduced.nrows() != n {
            return bad("reduced coordinates do not match the document count");
        }
        if self.reduced.iter().any(|x| !x.is_finite()) {
            return bad("reduced coordinates contain non-finite entries");
        }
        if self.labeling.len() != n {
            return bad("cluster labels do not match the document count");
        }
        if self.topics.doc_ids != self.embedding.doc_ids() {
            return bad("topic model documents differ from the embedding");
        }
        if self.topics.topics.iter().any(|t| t.vector.len() != self.embedding.dim()) {
            return bad("topic vectors differ in dimension from the embedding");
        }
        Ok(())
    }

    /// Archive bytes. Matrices are written as f32.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mats = [
            self.embedding.doc_vectors().to_owned(),
            self.embedding.word_vectors().to_owned(),
            self.embedding.coding().inner_node_vectors().clone(),
            self.reduced.clone(),
        ];
        let mut payload = Vec::with_capacity(mats.iter().map(|m| m.len() * 4).sum());
        let mut blocks = Vec::with_capacity(mats.len());
        for (name, m) in BLOCKS.iter().zip(&mats) {
            blocks.push(BlockInfo {
                name: (*name).to_owned(),
                rows: m.nrows(),
                cols: m.ncols(),
            });
            // `iter` walks in logical row-major order whatever the layout.
            for &x in m.iter() {
                payload.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
        let header = Header {
            embedding_config: self.embedding_config.clone(),
            reduction_config: self.reduction_config.clone(),
            cluster_config: self.cluster_config.clone(),
            vocabulary: self.embedding.vocabulary().clone(),
            doc_ids: self.embedding.doc_ids().to_vec(),
            labeling: self.labeling.clone(),
            topics: self.topics.clone(),
            blocks,
            payload_sha256: hex(&Sha256::digest(&payload)),
        };
        let header = serde_json::to_vec(&header).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let mut out = Vec::with_capacity(PREAMBLE + header.len() + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&payload);
        Ok(out)
    }

    /// Parses and fully validates archive bytes. Nothing is decoded past
    /// the version field unless the version matches.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(Error::UnsupportedFormat("missing TPFG magic bytes".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let corrupt = |m: String| Error::CorruptArchive(m);
        if bytes.len() < PREAMBLE {
            return Err(corrupt("truncated preamble".into()));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
        let header_end = usize::try_from(header_len)
            .ok()
            .and_then(|l| l.checked_add(PREAMBLE))
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| corrupt(format!("header length {header_len} exceeds file size")))?;
        let header: Header = serde_json::from_slice(&bytes[PREAMBLE..header_end])
            .map_err(|e| corrupt(format!("unreadable header: {e}")))?;

        let names: Vec<&str> = header.blocks.iter().map(|b| b.name.as_str()).collect();
        if names != BLOCKS {
            return Err(corrupt(format!("unexpected blocks {names:?}")));
        }
        let mut expected = 0usize;
        for b in &header.blocks {
            expected = b
                .rows
                .checked_mul(b.cols)
                .and_then(|c| c.checked_mul(4))
                .and_then(|c| c.checked_add(expected))
                .ok_or_else(|| corrupt("block sizes overflow".into()))?;
        }
        let payload = &bytes[header_end..];
        if payload.len() != expected {
            return Err(corrupt(format!(
                "payload is {} bytes, header declares {expected}",
                payload.len()
            )));
        }
        if hex(&Sha256::digest(payload)) != header.payload_sha256 {
            return Err(corrupt("payload checksum mismatch".into()));
        }

        let mut offset = 0;
        let mut mats = Vec::with_capacity(BLOCKS.len());
        for b in &header.blocks {
            let len = b.rows * b.cols;
            let data: Vec<f64> = payload[offset..offset + 4 * len]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect();
            offset += 4 * len;
            mats.push(Array2::from_shape_vec((b.rows, b.cols), data).expect("size checked"));
        }
        let reduced = mats.pop().expect("four blocks");
        let inner = mats.pop().expect("four blocks");
        let words = mats.pop().expect("four blocks");
        let docs = mats.pop().expect("four blocks");
        let invalid = |e: Error| corrupt(format!("invalid contents: {e}"));
        let embedding =
            SemanticEmbedding::from_parts(header.vocabulary, header.doc_ids, docs, words, inner).map_err(invalid)?;
        let archive = ModelArchive {
            embedding_config: header.embedding_config,
            reduction_config: header.reduction_config,
            cluster_config: header.cluster_config,
            embedding,
            reduced,
            labeling: header.labeling,
            topics: header.topics,
        };
        archive.validate().map_err(invalid)?;
        Ok(archive)
    }
}

pub fn save_model(archive: &ModelArchive, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = archive.to_bytes()?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelArchive> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    ModelArchive::from_bytes(&bytes)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::NOISE;
    use crate::synthetic::ThemedCorpus;

    fn small_archive() -> ModelArchive {
        let docs = ThemedCorpus::new(2, 10, 4).documents(30, 20, 5);
        let config = EmbeddingConfig {
            vector_size: 8,
            epochs: 2,
            min_count: 1,
            window: 3,
            ..Default::default()
        };
        let emb = to_archive_precision(&crate::embedding::train(&docs, &config).unwrap()).unwrap();
        let labels: Vec<i32> = (0..30).map(|i| if i == 3 { NOISE } else { i % 2 }).collect();
        let labeling = ClusterLabeling {
            labels,
            cluster_count: 2,
        };
        let topics = TopicModel::from_clusters(&emb, &labeling, 5).unwrap();
        let reduced = round_to_f32(&Array2::from_shape_fn((30, 2), |(i, j)| i as f64 * 0.1 + j as f64));
        ModelArchive {
            embedding_config: config,
            reduction_config: ReductionConfig::default(),
            cluster_config: ClusterConfig::default(),
            embedding: emb,
            reduced,
            labeling,
            topics,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let a = small_archive();
        let bytes = a.to_bytes().unwrap();
        let b = ModelArchive::from_bytes(&bytes).unwrap();
        assert_eq!(a, b);
        assert_eq!(b.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn f64_matrices_are_stored_as_f32() {
        let mut a = small_archive();
        a.reduced[[0, 0]] = 0.1;
        let b = ModelArchive::from_bytes(&a.to_bytes().unwrap()).unwrap();
        assert_eq!(b.reduced[[0, 0]], 0.1f32 as f64);
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        let bytes = small_archive().to_bytes().unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(ModelArchive::from_bytes(&bad), Err(Error::UnsupportedFormat(_))));
        let mut v2 = bytes.clone();
        v2[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            ModelArchive::from_bytes(&v2),
            Err(Error::VersionMismatch { found: 2, expected: 1 })
        ));
        // The version is checked even if nothing else follows it.
        assert!(matches!(ModelArchive::from_bytes(&v2[..8]), Err(Error::VersionMismatch { .. })));
    }

    #[test]
    fn rejects_truncation_and_corruption() {
        let bytes = small_archive().to_bytes().unwrap();
        for cut in [10, PREAMBLE + 5, bytes.len() - 1] {
            assert!(matches!(
                ModelArchive::from_bytes(&bytes[..cut]),
                Err(Error::CorruptArchive(_))
            ));
        }
        let mut flipped = bytes.clone();
        let last = flipped.len() - 3;
        flipped[last] ^= 0x40;
        assert!(matches!(ModelArchive::from_bytes(&flipped), Err(Error::CorruptArchive(_))));
        let mut extra = bytes;
        extra.push(0);
        assert!(matches!(ModelArchive::from_bytes(&extra), Err(Error::CorruptArchive(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tpfg");
        let a = small_archive();
        save_model(&a, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), a);
        assert!(matches!(load_model(dir.path().join("missing")), Err(Error::Io { .. })));
    }
}
