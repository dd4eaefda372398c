use crate::embed::EmbeddingVector;

use super::{rank_entries, ScoredEntry};

/// Exact cosine search over normalized copies of the input vectors.
///
/// Vectors are normalized once at build time so a search is a plain dot
/// product per document. Zero vectors cannot be normalized; they are kept
/// as-is and always score 0.
#[derive(Debug, Clone)]
pub struct FlatIndex {
    dim: usize,
    ids: Vec<String>,
    vectors: Vec<Vec<f64>>,
    zero: Vec<bool>,
}

impl FlatIndex {
    pub(crate) fn build(pairs: &[(String, EmbeddingVector)], dim: usize) -> Self {
        let mut ids = Vec::with_capacity(pairs.len());
        let mut vectors = Vec::with_capacity(pairs.len());
        let mut zero = Vec::with_capacity(pairs.len());
        for (id, v) in pairs {
            let unit = v.clone().normalize();
            zero.push(unit.is_zero());
            ids.push(id.clone());
            vectors.push(unit.values);
        }
        Self {
            dim,
            ids,
            vectors,
            zero,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn search(&self, query: &EmbeddingVector, k: usize) -> Vec<ScoredEntry> {
        let q = query.clone().normalize();
        let entries: Vec<ScoredEntry> = self
            .ids
            .iter()
            .zip(self.vectors.iter())
            .zip(self.zero.iter())
            .map(|((id, v), &is_zero)| {
                let score = if is_zero || q.is_zero() {
                    0.0
                } else {
                    dot(&q.values, v)
                };
                ScoredEntry {
                    sha: id.clone(),
                    score,
                }
            })
            .collect();
        rank_entries(entries, k)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}
