use super::{Embedder, EmbedderKind, EmbeddingVector};
use crate::textprep::tokenize;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a64(data: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in data {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Deterministic signed feature-hash embedding.
///
/// Each token lands in bucket `H(t) mod dim` with sign taken from bit 63 of
/// `H(t)`; contributions accumulate per occurrence and the result is
/// L2-normalized. An empty token stream (or one whose signs fully cancel)
/// yields the zero vector with `normalized == false`.
pub fn embed_hash(text: &str, dim: usize) -> EmbeddingVector {
    debug_assert!(dim >= 8);
    let stream = tokenize(text);
    let mut values = vec![0.0f64; dim];
    for token in &stream.tokens {
        let h = fnv1a64(token.as_bytes());
        let bucket = (h % dim as u64) as usize;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        values[bucket] += sign;
    }
    EmbeddingVector::new(values).normalize()
}

/// Offline embedder wrapping [`embed_hash`].
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl Embedder for HashEmbedder {
    fn kind(&self) -> EmbedderKind {
        EmbedderKind::Hash
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, super::EmbedError> {
        Ok(texts.iter().map(|t| embed_hash(t, self.dim)).collect())
    }
}
