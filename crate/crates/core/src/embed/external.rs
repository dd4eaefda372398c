use std::time::Duration;

use serde::Deserialize;

use super::{Embedder, EmbedderConfig, EmbedderKind, EmbedError, EmbeddingVector};

#[derive(Deserialize)]
struct WireResponse {
    data: Vec<WireItem>,
}

#[derive(Deserialize)]
struct WireItem {
    index: usize,
    embedding: Vec<f64>,
}

/// HTTP-backed embedder. POSTs `{"model", "input": [...]}` and expects
/// `{"data": [{"index", "embedding"}, ...]}`, one item per input.
pub struct ExternalEmbedder {
    agent: ureq::Agent,
    config: EmbedderConfig,
    endpoint: String,
}

impl ExternalEmbedder {
    pub fn new(config: EmbedderConfig) -> Result<Self, EmbedError> {
        config.validate()?;
        let endpoint = config
            .endpoint
            .clone()
            .ok_or_else(|| EmbedError::InvalidConfig("external embedder requires an endpoint".into()))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build()
            .into();
        Ok(Self {
            agent,
            config,
            endpoint,
        })
    }

    /// One wire round trip for a sub-batch. `offset` is the position of the
    /// sub-batch in the full input, used to name failing inputs.
    fn call(&self, texts: &[String], offset: usize) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let indices = || (offset..offset + texts.len()).collect::<Vec<_>>();

        let mut last_failure = String::new();
        for attempt in 0..=self.config.retry_count {
            if attempt > 0 {
                log::warn!(
                    "retrying embedding batch at offset {offset} (attempt {})",
                    attempt + 1
                );
            }
            let sent = self
                .agent
                .post(&self.endpoint)
                .send_json(serde_json::json!({
                    "model": self.config.model,
                    "input": texts,
                }));
            match sent {
                Ok(mut response) => {
                    let wire: WireResponse = response
                        .body_mut()
                        .read_json()
                        .map_err(|e| EmbedError::Protocol(e.to_string()))?;
                    return self.arrange(wire, texts.len(), offset);
                }
                Err(e) => last_failure = e.to_string(),
            }
        }
        Err(EmbedError::BatchFailed {
            indices: indices(),
            message: last_failure,
        })
    }

    /// Places wire items by their declared index and validates each vector.
    fn arrange(
        &self,
        wire: WireResponse,
        expected: usize,
        offset: usize,
    ) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if wire.data.len() != expected {
            return Err(EmbedError::Protocol(format!(
                "expected {expected} embeddings, got {}",
                wire.data.len()
            )));
        }
        let mut slots: Vec<Option<Vec<f64>>> = vec![None; expected];
        for item in wire.data {
            let slot = slots
                .get_mut(item.index)
                .ok_or_else(|| EmbedError::Protocol(format!("index {} out of range", item.index)))?;
            if slot.is_some() {
                return Err(EmbedError::Protocol(format!("duplicate index {}", item.index)));
            }
            *slot = Some(item.embedding);
        }

        let mut out = Vec::with_capacity(expected);
        for (i, slot) in slots.into_iter().enumerate() {
            let global = offset + i;
            let values = slot
                .ok_or_else(|| EmbedError::Protocol(format!("missing embedding for index {i}")))?;
            if values.len() != self.config.dim {
                return Err(EmbedError::DimMismatch {
                    index: Some(global),
                    want: self.config.dim,
                    got: values.len(),
                });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(EmbedError::NonFinite { index: global });
            }
            let vector = EmbeddingVector::new(values);
            if vector.is_zero() {
                return Err(EmbedError::ZeroVector { index: global });
            }
            out.push(if vector.normalized {
                vector
            } else {
                vector.normalize()
            });
        }
        Ok(out)
    }
}

impl Embedder for ExternalEmbedder {
    fn kind(&self) -> EmbedderKind {
        EmbedderKind::External
    }

    fn dim(&self) -> usize {
        self.config.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let mut out = Vec::with_capacity(texts.len());
        for (chunk_no, chunk) in texts.chunks(self.config.batch_size).enumerate() {
            let offset = chunk_no * self.config.batch_size;
            out.extend(self.call(chunk, offset)?);
        }
        Ok(out)
    }
}

/// Embeds a batch through a one-shot external embedder.
pub fn embed_external(
    texts: &[String],
    config: &EmbedderConfig,
) -> Result<Vec<EmbeddingVector>, EmbedError> {
    if texts.is_empty() {
        return Err(EmbedError::InvalidConfig("empty batch".into()));
    }
    if config.kind != EmbedderKind::External {
        return Err(EmbedError::InvalidConfig(
            "embed_external requires kind == external".into(),
        ));
    }
    ExternalEmbedder::new(config.clone())?.embed_batch(texts)
}
