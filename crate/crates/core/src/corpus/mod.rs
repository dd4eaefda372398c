//! Corpus ingestion and dataset construction.
//!
//! Ingests NVD vulnerability feeds and commit logs, applies CWE filtering,
//! builds temporally-constrained candidate sets, and produces reproducible
//! train/valid/test splits.

mod candidates;
mod commits;
mod nvd;
mod split;
mod types;

pub use candidates::{build_candidate_set, build_candidate_set_with_forced, filter_by_cwe};
pub use commits::{ingest_commit_log, CommitIngest};
pub use nvd::{parse_nvd_feed, NvdIngest};
pub use split::{split_dataset, SplitRatios};
pub use types::{CandidateSet, CommitRecord, DatasetSplit, LinkedPair, SplitName, VulnRecord};

use thiserror::Error;

/// Errors produced while building or validating corpus data.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed NVD JSON at byte {offset} (line {line}, column {column}): {message}")]
    MalformedFeed {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("NVD feed has no `vulnerabilities` array")]
    MissingVulnerabilities,
    #[error("candidate commits span multiple repositories: {first} vs {second}")]
    MixedRepos { first: String, second: String },
    #[error("window_days must be >= 1, got {0}")]
    InvalidWindow(u32),
    #[error("split ratios must be positive and sum to 1, got ({0}, {1}, {2})")]
    InvalidRatios(f64, f64, f64),
    #[error("cannot split {0} ids into three non-empty-capable splits (need at least 3)")]
    TooFewIds(usize),
    #[error("duplicate cve id in split input: {0}")]
    DuplicateCveId(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
