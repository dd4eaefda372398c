//! Desk-scale contrastive training: InfoNCE loss with analytic gradients for
//! a linear projection head over frozen base embeddings, plus hybrid
//! hard-negative mining.

mod head;
mod loss;
mod mine;
mod sgd;

pub use head::ProjectionHead;
pub use loss::{infonce_grad, infonce_loss};
pub use mine::{hybrid_pool, mine_hard_negatives, MiningConfig};
pub use sgd::{train_projection, TrainReport};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{EmbedError, Embedder, EmbeddingVector};
use crate::textprep::AugmentedMessage;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dimension mismatch: expected {want}, got {got}")]
    DimMismatch { want: usize, got: usize },
    #[error("temperature must be positive, got {0}")]
    InvalidTau(f64),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("invalid training example: {0}")]
    InvalidExample(String),
    #[error("projected vector is zero for {0}; cosine gradient undefined")]
    DegenerateProjection(String),
    #[error("no training examples")]
    NoExamples,
    #[error("candidate {0} has no message")]
    MissingMessage(String),
    #[error(transparent)]
    Lexical(#[from] crate::lexical::LexicalError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("persisted head is invalid: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One contrastive instance: a query with one positive and its mined
/// negatives, all as frozen base embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub cve_id: String,
    pub query_vec: EmbeddingVector,
    pub positive_id: String,
    pub positive_vec: EmbeddingVector,
    pub hard_negative_ids: Vec<String>,
    pub hard_negative_vecs: Vec<EmbeddingVector>,
}

impl TrainingExample {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.hard_negative_ids.len() != self.hard_negative_vecs.len() {
            return Err(TrainError::InvalidExample(format!(
                "{}: {} negative ids but {} vectors",
                self.cve_id,
                self.hard_negative_ids.len(),
                self.hard_negative_vecs.len()
            )));
        }
        if self.hard_negative_ids.iter().any(|id| *id == self.positive_id) {
            return Err(TrainError::InvalidExample(format!(
                "{}: positive {} listed among negatives",
                self.cve_id, self.positive_id
            )));
        }
        let dim = self.query_vec.dim;
        for v in std::iter::once(&self.positive_vec).chain(self.hard_negative_vecs.iter()) {
            if v.dim != dim {
                return Err(TrainError::DimMismatch {
                    want: dim,
                    got: v.dim,
                });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.query_vec.dim
    }
}

/// Hyperparameters for the projection-head trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub tau: f64,
    pub seed: u64,
    /// Treat the other positives in each batch as extra negatives.
    pub in_batch_negatives: bool,
    pub d_out: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 3,
            batch_size: 32,
            learning_rate: 1e-4,
            tau: 0.01,
            seed: 0,
            in_batch_negatives: true,
            d_out: 64,
        }
    }
}

impl TrainConfig {
    /// A zero learning rate is allowed: it turns training into a
    /// reproducible initialization step.
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.tau > 0.0) {
            return Err(TrainError::InvalidTau(self.tau));
        }
        if self.epochs < 1 {
            return Err(TrainError::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(TrainError::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(TrainError::InvalidConfig(format!(
                "learning_rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.d_out < 1 {
            return Err(TrainError::InvalidConfig("d_out must be >= 1".into()));
        }
        Ok(())
    }
}

/// Builds one example per true positive, sharing the query embedding and the
/// mined negatives across them.
pub fn build_training_examples(
    cve_id: &str,
    description: &str,
    positive_shas: &BTreeSet<String>,
    negative_shas: &[String],
    messages: &BTreeMap<String, AugmentedMessage>,
    embedder: &dyn Embedder,
) -> Result<Vec<TrainingExample>, TrainError> {
    let query_vec = embedder.embed_one(description)?;
    let mut negative_vecs = Vec::with_capacity(negative_shas.len());
    for sha in negative_shas {
        let message = messages
            .get(sha)
            .ok_or_else(|| TrainError::MissingMessage(sha.clone()))?;
        negative_vecs.push(embedder.embed_one(&message.combined)?);
    }
    let mut examples = Vec::with_capacity(positive_shas.len());
    for sha in positive_shas {
        let message = messages
            .get(sha)
            .ok_or_else(|| TrainError::MissingMessage(sha.clone()))?;
        let example = TrainingExample {
            cve_id: cve_id.to_string(),
            query_vec: query_vec.clone(),
            positive_id: sha.clone(),
            positive_vec: embedder.embed_one(&message.combined)?,
            hard_negative_ids: negative_shas.to_vec(),
            hard_negative_vecs: negative_vecs.clone(),
        };
        example.validate()?;
        examples.push(example);
    }
    Ok(examples)
}
