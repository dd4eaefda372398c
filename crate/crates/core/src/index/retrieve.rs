use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{CandidateSet, VulnRecord};
use crate::embed::{Embedder, EmbeddingVector};
use crate::textprep::{AugmentedMessage, MessageSource};
use crate::train::ProjectionHead;

use super::{index_build, index_search, IndexError, IndexKind, RankedList};

/// How a ranking was produced; stored alongside the ranking itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalProvenance {
    pub embedder_kind: String,
    /// Content hash of the projection head, when one was applied.
    pub head_id: Option<String>,
    /// Candidates whose message carries generated text.
    pub augmented_shas: Vec<String>,
}

/// Ranked candidates for one vulnerability plus run provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CveRetrieval {
    pub ranked: RankedList,
    pub provenance: RetrievalProvenance,
}

/// Embeds the vulnerability description and every candidate message, applies
/// the projection head when present, and ranks candidates by cosine over an
/// ephemeral flat index.
pub fn retrieve_for_cve(
    cve: &VulnRecord,
    candidates: &CandidateSet,
    messages: &BTreeMap<String, AugmentedMessage>,
    embedder: &dyn Embedder,
    head: Option<&ProjectionHead>,
    k: usize,
) -> Result<CveRetrieval, IndexError> {
    debug_assert!(k >= 1);
    let mut texts = Vec::with_capacity(candidates.candidate_shas.len() + 1);
    texts.push(cve.description.clone());
    let mut augmented_shas = Vec::new();
    for sha in &candidates.candidate_shas {
        let message = messages
            .get(sha)
            .ok_or_else(|| IndexError::MissingMessage(sha.clone()))?;
        if message.source == MessageSource::GeneratedAppended {
            augmented_shas.push(sha.clone());
        }
        texts.push(message.combined.clone());
    }

    let mut vectors = embedder.embed_batch(&texts)?;
    if let Some(head) = head {
        if head.d_in != embedder.dim() {
            return Err(IndexError::DimMismatch {
                want: head.d_in,
                got: embedder.dim(),
            });
        }
        for v in &mut vectors {
            *v = head.project_vec(v);
        }
    }
    let query = vectors.remove(0);

    let pairs: Vec<(String, EmbeddingVector)> = candidates
        .candidate_shas
        .iter()
        .cloned()
        .zip(vectors)
        .collect();
    let index = index_build(&pairs, IndexKind::Flat)?;
    let entries = index_search(&index, &query, k)?;

    Ok(CveRetrieval {
        ranked: RankedList::new(&cve.cve_id, entries),
        provenance: RetrievalProvenance {
            embedder_kind: embedder.kind().to_string(),
            head_id: head.map(|h| h.id()),
            augmented_shas,
        },
    })
}
