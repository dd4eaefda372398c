//! Sparse retrieval over an inverted index: Okapi BM25 and TF-IDF cosine.
//! Used for hard-negative mining and as a standalone baseline ranker.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::index::{RankedList, ScoredEntry};
use crate::textprep::TokenStream;

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;

#[derive(Debug, Error)]
pub enum LexicalError {
    #[error("document {0:?} is not in the index")]
    UnknownDoc(String),
}

/// Which scoring function a ranking run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexicalScorer {
    Bm25,
    Tfidf,
}

/// Immutable inverted index over tokenized documents.
///
/// Invariants: doc_freq ≤ doc_count for every term; postings are sorted by
/// document; avg_doc_len > 0 whenever any document is non-empty.
#[derive(Debug, Clone)]
pub struct PostingIndex {
    vocab: BTreeMap<String, usize>,
    doc_ids: Vec<String>,
    doc_freq: Vec<usize>,
    postings: Vec<Vec<(usize, usize)>>,
    doc_len: Vec<usize>,
    avg_doc_len: f64,
}

/// Builds an inverted index. Map input keeps doc ids unique; documents are
/// numbered in sorted id order so builds are reproducible.
pub fn build_posting_index(docs: &BTreeMap<String, TokenStream>) -> PostingIndex {
    let doc_ids: Vec<String> = docs.keys().cloned().collect();

    let mut vocab: BTreeMap<String, usize> = BTreeMap::new();
    for stream in docs.values() {
        for token in &stream.tokens {
            let next = vocab.len();
            vocab.entry(token.clone()).or_insert(next);
        }
    }
    // Renumber term ids in sorted token order.
    for (i, (_, id)) in vocab.iter_mut().enumerate() {
        *id = i;
    }

    let mut doc_freq = vec![0usize; vocab.len()];
    let mut postings: Vec<Vec<(usize, usize)>> = vec![Vec::new(); vocab.len()];
    let mut doc_len = Vec::with_capacity(doc_ids.len());

    for (doc_idx, stream) in docs.values().enumerate() {
        doc_len.push(stream.tokens.len());
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for token in &stream.tokens {
            let term = vocab[token];
            *counts.entry(term).or_insert(0) += 1;
        }
        for (term, tf) in counts {
            doc_freq[term] += 1;
            postings[term].push((doc_idx, tf));
        }
    }

    let total: usize = doc_len.iter().sum();
    let avg_doc_len = if doc_ids.is_empty() {
        0.0
    } else {
        total as f64 / doc_ids.len() as f64
    };

    PostingIndex {
        vocab,
        doc_ids,
        doc_freq,
        postings,
        doc_len,
        avg_doc_len,
    }
}

impl PostingIndex {
    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_freq(&self, token: &str) -> usize {
        self.vocab.get(token).map_or(0, |&t| self.doc_freq[t])
    }

    pub fn doc_len(&self, doc_id: &str) -> Option<usize> {
        self.doc_index(doc_id).map(|i| self.doc_len[i])
    }

    fn doc_index(&self, doc_id: &str) -> Option<usize> {
        self.doc_ids.binary_search_by(|d| d.as_str().cmp(doc_id)).ok()
    }

    fn term_freq(&self, term: usize, doc_idx: usize) -> usize {
        self.postings[term]
            .binary_search_by_key(&doc_idx, |&(d, _)| d)
            .map(|p| self.postings[term][p].1)
            .unwrap_or(0)
    }
}

/// Okapi BM25 with the +1-smoothed idf `ln(1 + (N - df + 0.5)/(df + 0.5))`,
/// which keeps every score non-negative. Query tokens absent from the
/// vocabulary contribute nothing.
pub fn score_bm25(
    index: &PostingIndex,
    query: &TokenStream,
    doc_id: &str,
    k1: f64,
    b: f64,
) -> Result<f64, LexicalError> {
    let doc_idx = index
        .doc_index(doc_id)
        .ok_or_else(|| LexicalError::UnknownDoc(doc_id.to_string()))?;

    let n = index.doc_count() as f64;
    let mut score = 0.0;
    for token in &query.tokens {
        let Some(&term) = index.vocab.get(token) else {
            continue;
        };
        let tf = index.term_freq(term, doc_idx) as f64;
        if tf == 0.0 {
            continue;
        }
        let df = index.doc_freq[term] as f64;
        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        // tf > 0 implies the document is non-empty, so avg_doc_len > 0.
        let norm = 1.0 - b + b * (index.doc_len[doc_idx] as f64 / index.avg_doc_len);
        score += idf * tf * (k1 + 1.0) / (tf + k1 * norm);
    }
    Ok(score)
}

/// Cosine of tf·idf weighted vectors with idf = ln(N/df). Returns 0 when
/// either weighted vector is zero.
pub fn score_tfidf_cosine(
    index: &PostingIndex,
    query: &TokenStream,
    doc_id: &str,
) -> Result<f64, LexicalError> {
    let doc_idx = index
        .doc_index(doc_id)
        .ok_or_else(|| LexicalError::UnknownDoc(doc_id.to_string()))?;
    let n = index.doc_count() as f64;

    let mut query_tf: BTreeMap<usize, usize> = BTreeMap::new();
    for token in &query.tokens {
        if let Some(&term) = index.vocab.get(token) {
            *query_tf.entry(term).or_insert(0) += 1;
        }
    }

    let mut dot = 0.0;
    let mut query_norm_sq = 0.0;
    for (&term, &tf) in &query_tf {
        let idf = (n / index.doc_freq[term] as f64).ln();
        let qw = tf as f64 * idf;
        query_norm_sq += qw * qw;
        let doc_tf = index.term_freq(term, doc_idx) as f64;
        dot += qw * doc_tf * idf;
    }

    let mut doc_norm_sq = 0.0;
    for (term, posting) in index.postings.iter().enumerate() {
        if let Ok(p) = posting.binary_search_by_key(&doc_idx, |&(d, _)| d) {
            let idf = (n / index.doc_freq[term] as f64).ln();
            let dw = posting[p].1 as f64 * idf;
            doc_norm_sq += dw * dw;
        }
    }

    if query_norm_sq == 0.0 || doc_norm_sq == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (query_norm_sq.sqrt() * doc_norm_sq.sqrt()))
}

/// Scores every document and returns the top k, ties broken by ascending
/// doc id. Fewer than k documents means all of them are returned. The
/// caller stamps the query id onto the returned list.
pub fn rank_lexical(
    index: &PostingIndex,
    query: &TokenStream,
    k: usize,
    scorer: LexicalScorer,
) -> RankedList {
    debug_assert!(k >= 1);
    let mut entries: Vec<ScoredEntry> = index
        .doc_ids
        .iter()
        .map(|doc_id| {
            let score = match scorer {
                LexicalScorer::Bm25 => {
                    score_bm25(index, query, doc_id, DEFAULT_K1, DEFAULT_B).expect("known doc")
                }
                LexicalScorer::Tfidf => {
                    score_tfidf_cosine(index, query, doc_id).expect("known doc")
                }
            };
            ScoredEntry {
                sha: doc_id.clone(),
                score,
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("finite scores")
            .then_with(|| a.sha.cmp(&b.sha))
    });
    entries.truncate(k);
    RankedList::anonymous(entries)
}
