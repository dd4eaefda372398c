//! Retrieval engine for tracing vulnerability records to their fixing commits.
//!
//! The pipeline is organized as a set of composable stages:
//!
//! - [`corpus`]: NVD feed and commit-log ingestion, temporal candidate
//!   windows, CWE filtering, and reproducible dataset splits.
//! - [`textprep`]: deterministic tokenization and commit-message
//!   augmentation for commits whose messages carry too little signal.
//! - [`lexical`]: TF-IDF and BM25 sparse retrieval over an inverted index.
//! - [`embed`]: dense embeddings behind a provider abstraction: a
//!   deterministic feature-hash embedder plus an external HTTP embedder.
//! - [`train`]: InfoNCE contrastive training of a linear projection head
//!   over frozen base embeddings, with hard-negative mining.
//! - [`index`]: exact flat and approximate HNSW vector search, plus the
//!   per-vulnerability retrieval orchestration.
//! - [`eval`]: ranking metrics (Recall@K, MRR, Manual Effort@K,
//!   Precision@K) and cross-run rank-1 overlap reports.
//! - [`synth`]: seeded synthetic corpora used by tests and benchmarks.

pub mod corpus;
pub mod embed;
pub mod eval;
pub mod index;
pub mod lexical;
pub mod synth;
pub mod textprep;
pub mod train;

pub use corpus::{CandidateSet, CommitRecord, DatasetSplit, LinkedPair, VulnRecord};
pub use embed::{cosine, EmbedderConfig, EmbeddingVector};
pub use eval::{GroundTruth, MetricReport, RunPredictions};
pub use index::{RankedList, VectorIndex};
pub use lexical::PostingIndex;
pub use textprep::{AugmentedMessage, TokenStream};
pub use train::{ProjectionHead, TrainConfig, TrainingExample};
