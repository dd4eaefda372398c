//! Dense embeddings behind a provider abstraction: a deterministic
//! feature-hash embedder for offline work and an external HTTP embedder
//! speaking the de-facto embeddings-API wire shape.

mod external;
mod hash;

pub use external::{embed_external, ExternalEmbedder};
pub use hash::{embed_hash, fnv1a64, HashEmbedder};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("dimension mismatch: want {want}, got {got}{}", fmt_index(.index))]
    DimMismatch {
        index: Option<usize>,
        want: usize,
        got: usize,
    },
    #[error("non-finite embedding entry at input {index}")]
    NonFinite { index: usize },
    #[error("provider returned an all-zero embedding for input {index}")]
    ZeroVector { index: usize },
    #[error("embedding batch failed for inputs {indices:?}: {message}")]
    BatchFailed {
        indices: Vec<usize>,
        message: String,
    },
    #[error("embedding response violates the wire contract: {0}")]
    Protocol(String),
    #[error("invalid embedder configuration: {0}")]
    InvalidConfig(String),
}

fn fmt_index(index: &Option<usize>) -> String {
    index.map_or(String::new(), |i| format!(" at input {i}"))
}

/// A dense vector. `normalized` asserts unit L2 norm within 1e-9; the
/// all-zero vector always carries `normalized == false`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub dim: usize,
    pub values: Vec<f64>,
    pub normalized: bool,
}

impl EmbeddingVector {
    /// Wraps raw values, measuring whether they already have unit norm.
    pub fn new(values: Vec<f64>) -> Self {
        let norm = l2(&values);
        Self {
            dim: values.len(),
            normalized: (norm - 1.0).abs() <= 1e-9,
            values,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            values: vec![0.0; dim],
            normalized: false,
        }
    }

    pub fn norm(&self) -> f64 {
        l2(&self.values)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    /// Scales to unit norm. The zero vector is returned unchanged with
    /// `normalized == false`.
    pub fn normalize(mut self) -> Self {
        let norm = self.norm();
        if norm == 0.0 {
            self.normalized = false;
            return self;
        }
        for v in &mut self.values {
            *v /= norm;
        }
        self.normalized = true;
        self
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.values.len() != self.dim {
            return Err(EmbedError::DimMismatch {
                index: None,
                want: self.dim,
                got: self.values.len(),
            });
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite { index: i });
        }
        if self.normalized && (self.norm() - 1.0).abs() > 1e-9 {
            return Err(EmbedError::Protocol(format!(
                "vector flagged normalized has norm {}",
                self.norm()
            )));
        }
        Ok(())
    }
}

fn l2(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Cosine similarity. Either vector zero → 0.0 by convention, which keeps
/// the value defined everywhere.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    if a.dim != b.dim {
        return Err(EmbedError::DimMismatch {
            index: None,
            want: a.dim,
            got: b.dim,
        });
    }
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok(dot / (na * nb))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Hash,
    External,
}

impl std::fmt::Display for EmbedderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EmbedderKind::Hash => write!(f, "hash"),
            EmbedderKind::External => write!(f, "external"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderConfig {
    pub kind: EmbedderKind,
    pub dim: usize,
    /// Required for the external kind; ignored by the hash embedder.
    pub endpoint: Option<String>,
    pub timeout_secs: u64,
    pub batch_size: usize,
    pub retry_count: u32,
    /// Model name forwarded on the wire to external providers.
    pub model: String,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            kind: EmbedderKind::Hash,
            dim: 256,
            endpoint: None,
            timeout_secs: 30,
            batch_size: 16,
            retry_count: 2,
            model: "default".to_string(),
        }
    }
}

impl EmbedderConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.dim < 8 {
            return Err(EmbedError::InvalidConfig(format!(
                "dim must be at least 8, got {}",
                self.dim
            )));
        }
        if self.batch_size < 1 {
            return Err(EmbedError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.kind == EmbedderKind::External && self.endpoint.is_none() {
            return Err(EmbedError::InvalidConfig(
                "external embedder requires an endpoint".into(),
            ));
        }
        Ok(())
    }
}

/// Text-to-vector provider. Implementations must be thread-safe; retrieval
/// and mining fan out across CVEs.
pub trait Embedder: Send + Sync {
    fn kind(&self) -> EmbedderKind;
    fn dim(&self) -> usize;
    /// One vector per input text, in input order.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError>;

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut out = self.embed_batch(std::slice::from_ref(&text.to_string()))?;
        Ok(out.remove(0))
    }
}

/// Builds the embedder described by a validated config.
pub fn make_embedder(config: &EmbedderConfig) -> Result<Box<dyn Embedder>, EmbedError> {
    config.validate()?;
    match config.kind {
        EmbedderKind::Hash => Ok(Box::new(HashEmbedder::new(config.dim))),
        EmbedderKind::External => Ok(Box::new(ExternalEmbedder::new(config.clone())?)),
    }
}
