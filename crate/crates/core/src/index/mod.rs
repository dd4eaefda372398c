//! Vector indexing and top-k retrieval: exact flat cosine search as the
//! reference path, seeded HNSW approximate search for large corpora, and the
//! per-vulnerability retrieval orchestration.

mod flat;
mod hnsw;
mod persist;
mod retrieve;

pub use flat::FlatIndex;
pub use hnsw::{HnswIndex, HnswParams};
pub use persist::{load_hnsw_graph, load_vectors, save_hnsw_graph, save_vectors};
pub use retrieve::{retrieve_for_cve, CveRetrieval, RetrievalProvenance};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::EmbeddingVector;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("dimension mismatch: index holds {want}, got {got}")]
    DimMismatch { want: usize, got: usize },
    #[error("duplicate id {0:?} in index input")]
    DuplicateId(String),
    #[error("cannot build an index over zero vectors")]
    Empty,
    #[error("candidate {0} has no message")]
    MissingMessage(String),
    #[error("embedding failed: {0}")]
    Embed(#[from] crate::embed::EmbedError),
    #[error("persisted index is inconsistent: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One retrieved document with its similarity score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEntry {
    pub sha: String,
    pub score: f64,
}

/// Ranked retrieval output for one query.
///
/// Invariants: scores non-increasing and finite; equal scores ordered by
/// ascending sha; no duplicate shas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub cve_id: String,
    #[serde(rename = "ranked")]
    pub entries: Vec<ScoredEntry>,
}

impl RankedList {
    pub fn new(cve_id: &str, entries: Vec<ScoredEntry>) -> Self {
        let list = Self {
            cve_id: cve_id.to_string(),
            entries,
        };
        debug_assert!(list.check_invariants().is_ok());
        list
    }

    /// A list not yet attributed to a query; the caller stamps the id.
    pub fn anonymous(entries: Vec<ScoredEntry>) -> Self {
        Self::new("", entries)
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.entries {
            if !e.score.is_finite() {
                return Err(format!("non-finite score for {}", e.sha));
            }
            if !seen.insert(e.sha.as_str()) {
                return Err(format!("duplicate sha {}", e.sha));
            }
        }
        for w in self.entries.windows(2) {
            if w[0].score < w[1].score {
                return Err(format!("scores increase at {}", w[1].sha));
            }
            if w[0].score == w[1].score && w[0].sha >= w[1].sha {
                return Err(format!("tie between {} and {} not in sha order", w[0].sha, w[1].sha));
            }
        }
        Ok(())
    }
}

/// Sorts entries into the canonical ranked order and keeps the top k.
pub(crate) fn rank_entries(mut entries: Vec<ScoredEntry>, k: usize) -> Vec<ScoredEntry> {
    entries.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("finite scores")
            .then_with(|| a.sha.cmp(&b.sha))
    });
    entries.truncate(k);
    entries
}

/// Which index structure to build.
#[derive(Debug, Clone, PartialEq)]
pub enum IndexKind {
    Flat,
    Hnsw(HnswParams),
}

/// A built vector index, searchable concurrently.
#[derive(Debug, Clone)]
pub enum VectorIndex {
    Flat(FlatIndex),
    Hnsw(HnswIndex),
}

impl VectorIndex {
    pub fn dim(&self) -> usize {
        match self {
            VectorIndex::Flat(i) => i.dim(),
            VectorIndex::Hnsw(i) => i.dim(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            VectorIndex::Flat(i) => i.len(),
            VectorIndex::Hnsw(i) => i.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            VectorIndex::Flat(_) => "flat",
            VectorIndex::Hnsw(_) => "hnsw",
        }
    }
}

/// Builds an immutable index over `(id, vector)` pairs. All vectors must
/// share one dimension; ids must be unique. Zero vectors are accepted and
/// flagged internally; they score 0 against every query.
pub fn index_build(
    pairs: &[(String, EmbeddingVector)],
    kind: IndexKind,
) -> Result<VectorIndex, IndexError> {
    if pairs.is_empty() {
        return Err(IndexError::Empty);
    }
    let dim = pairs[0].1.dim;
    let mut seen = std::collections::BTreeSet::new();
    for (id, v) in pairs {
        if v.dim != dim || v.values.len() != dim {
            return Err(IndexError::DimMismatch {
                want: dim,
                got: v.dim,
            });
        }
        if !seen.insert(id.as_str()) {
            return Err(IndexError::DuplicateId(id.clone()));
        }
    }
    Ok(match kind {
        IndexKind::Flat => VectorIndex::Flat(FlatIndex::build(pairs, dim)),
        IndexKind::Hnsw(params) => VectorIndex::Hnsw(HnswIndex::build(pairs, dim, params)),
    })
}

/// Top-k most similar ids by cosine. Flat search is exact; HNSW is
/// approximate. `k >= len` returns everything, fully sorted.
pub fn index_search(
    index: &VectorIndex,
    query: &EmbeddingVector,
    k: usize,
) -> Result<Vec<ScoredEntry>, IndexError> {
    debug_assert!(k >= 1);
    if query.dim != index.dim() {
        return Err(IndexError::DimMismatch {
            want: index.dim(),
            got: query.dim,
        });
    }
    Ok(match index {
        VectorIndex::Flat(i) => i.search(query, k),
        VectorIndex::Hnsw(i) => i.search(query, k),
    })
}
