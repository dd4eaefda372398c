use std::collections::{BTreeMap, BTreeSet};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CandidateSet, VulnRecord};
use crate::embed::{cosine, fnv1a64, Embedder};
use crate::lexical::{score_bm25, PostingIndex, DEFAULT_B, DEFAULT_K1};
use crate::textprep::{tokenize, AugmentedMessage};

use super::TrainError;

/// Knobs for hybrid hard-negative mining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningConfig {
    /// Pool size taken from the top of the hybrid ranking.
    pub top_n: usize,
    /// Negatives sampled from the pool per vulnerability.
    pub m: usize,
    /// Base seed; each vulnerability derives its own stream from it.
    pub seed: u64,
}

impl Default for MiningConfig {
    fn default() -> Self {
        Self {
            top_n: 100,
            m: 7,
            seed: 0,
        }
    }
}

/// Min-max normalization onto [0, 1]; a constant column maps to 0.5.
fn min_max(scores: &[f64]) -> Vec<f64> {
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max - min <= 0.0 {
        return vec![0.5; scores.len()];
    }
    scores.iter().map(|s| (s - min) / (max - min)).collect()
}

/// The top_n candidates by hybrid score with ground truth excluded, ranked
/// best first. Hybrid score = mean of min-max-normalized BM25 and cosine,
/// both scored against the vulnerability description over the full
/// candidate set.
pub fn hybrid_pool(
    cve: &VulnRecord,
    candidates: &CandidateSet,
    messages: &BTreeMap<String, AugmentedMessage>,
    lexical: &PostingIndex,
    embedder: &dyn Embedder,
    truth: &BTreeSet<String>,
    top_n: usize,
) -> Result<Vec<String>, TrainError> {
    if candidates.is_empty() {
        return Err(TrainError::InvalidConfig(format!(
            "{}: empty candidate set",
            cve.cve_id
        )));
    }
    let query_tokens = tokenize(&cve.description);
    let query_vec = embedder.embed_one(&cve.description)?;

    let mut bm25 = Vec::with_capacity(candidates.len());
    let mut dense = Vec::with_capacity(candidates.len());
    for sha in &candidates.candidate_shas {
        bm25.push(score_bm25(lexical, &query_tokens, sha, DEFAULT_K1, DEFAULT_B)?);
        let message = messages
            .get(sha)
            .ok_or_else(|| TrainError::MissingMessage(sha.clone()))?;
        let vec = embedder.embed_one(&message.combined)?;
        dense.push(cosine(&query_vec, &vec)?);
    }

    let bm25 = min_max(&bm25);
    let dense = min_max(&dense);
    let mut ranked: Vec<(f64, &String)> = candidates
        .candidate_shas
        .iter()
        .zip(bm25.iter().zip(dense.iter()))
        .filter(|(sha, _)| !truth.contains(*sha))
        .map(|(sha, (b, d))| ((b + d) / 2.0, sha))
        .collect();
    ranked.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("finite hybrid scores")
            .then_with(|| a.1.cmp(b.1))
    });
    ranked.truncate(top_n);
    Ok(ranked.into_iter().map(|(_, sha)| sha.clone()).collect())
}

/// Samples `m` hard negatives without replacement from the hybrid pool.
/// Output preserves pool rank order. The per-vulnerability generator is
/// seeded with `seed XOR hash(cve_id)` so mining stays deterministic when
/// parallelized across vulnerabilities.
pub fn mine_hard_negatives(
    cve: &VulnRecord,
    candidates: &CandidateSet,
    messages: &BTreeMap<String, AugmentedMessage>,
    lexical: &PostingIndex,
    embedder: &dyn Embedder,
    truth: &BTreeSet<String>,
    config: &MiningConfig,
) -> Result<Vec<String>, TrainError> {
    if config.m > config.top_n {
        return Err(TrainError::InvalidConfig(format!(
            "m ({}) exceeds top_n ({})",
            config.m, config.top_n
        )));
    }
    let pool = hybrid_pool(
        cve,
        candidates,
        messages,
        lexical,
        embedder,
        truth,
        config.top_n,
    )?;
    if pool.is_empty() {
        log::warn!(
            "{}: every candidate is ground truth; no negatives mined",
            cve.cve_id
        );
        return Ok(Vec::new());
    }
    if pool.len() <= config.m {
        return Ok(pool);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ fnv1a64(cve.cve_id.as_bytes()));
    let mut picks = rand::seq::index::sample(&mut rng, pool.len(), config.m).into_vec();
    picks.sort_unstable();
    Ok(picks.into_iter().map(|i| pool[i].clone()).collect())
}
