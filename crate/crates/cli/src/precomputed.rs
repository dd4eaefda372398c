//! An embedder backed by a text-to-vector table built in an earlier stage.
//!
//! Keeps external providers at exactly one call per distinct text: the embed
//! stage talks to the provider, later stages replay its outputs through this
//! adapter wherever the core library expects an `Embedder`.

use std::collections::BTreeMap;

use psk_core::embed::{EmbedError, Embedder, EmbedderKind, EmbeddingVector};

pub struct PrecomputedEmbedder {
    by_text: BTreeMap<String, EmbeddingVector>,
    kind: EmbedderKind,
    dim: usize,
}

impl PrecomputedEmbedder {
    /// Builds the table from `(text, vector)` pairs. Duplicate texts must
    /// carry identical vectors; embedding is a function of the text.
    pub fn new(
        pairs: impl IntoIterator<Item = (String, EmbeddingVector)>,
        kind: EmbedderKind,
    ) -> Result<Self, EmbedError> {
        let mut by_text: BTreeMap<String, EmbeddingVector> = BTreeMap::new();
        let mut dim = None;
        for (text, vector) in pairs {
            match dim {
                None => dim = Some(vector.dim),
                Some(d) if d != vector.dim => {
                    return Err(EmbedError::DimMismatch {
                        index: None,
                        want: d,
                        got: vector.dim,
                    })
                }
                Some(_) => {}
            }
            if let Some(existing) = by_text.get(&text) {
                if *existing != vector {
                    return Err(EmbedError::Protocol(format!(
                        "conflicting vectors precomputed for one text ({} chars)",
                        text.len()
                    )));
                }
                continue;
            }
            by_text.insert(text, vector);
        }
        let dim = dim.ok_or_else(|| {
            EmbedError::InvalidConfig("precomputed table needs at least one vector".into())
        })?;
        Ok(Self { by_text, kind, dim })
    }
}

impl Embedder for PrecomputedEmbedder {
    fn kind(&self) -> EmbedderKind {
        self.kind
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let mut out = Vec::with_capacity(texts.len());
        let mut missing = Vec::new();
        for (i, text) in texts.iter().enumerate() {
            match self.by_text.get(text) {
                Some(v) => out.push(v.clone()),
                None => missing.push(i),
            }
        }
        if !missing.is_empty() {
            return Err(EmbedError::BatchFailed {
                indices: missing,
                message: "text was not embedded in the embed stage".into(),
            });
        }
        Ok(out)
    }
}
