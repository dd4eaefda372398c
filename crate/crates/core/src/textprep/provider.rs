use std::time::Duration;

use serde_json::Value;
use thiserror::Error;

/// Failure modes of an external generation call. All of them degrade to the
/// template fallback at the augmentation layer.
#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("provider returned HTTP status {status}")]
    Http { status: u16 },
    #[error("provider call timed out")]
    Timeout,
    #[error("provider transport failure: {0}")]
    Transport(String),
    #[error("provider response violates the wire contract: {0}")]
    Protocol(String),
}

/// Produces a one-line summary of a (truncated) diff.
pub trait GenerationProvider: Send + Sync {
    fn generate(&self, diff: &str, max_new_tokens: u32) -> Result<String, ProviderError>;
}

/// HTTP-backed provider. POSTs `{"diff", "max_new_tokens"}` to the endpoint
/// and expects `{"message": string}` back.
pub struct HttpGenerationProvider {
    agent: ureq::Agent,
    endpoint: String,
}

impl HttpGenerationProvider {
    pub fn new(endpoint: &str, timeout_secs: u64) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(timeout_secs)))
            .build()
            .into();
        Self {
            agent,
            endpoint: endpoint.to_string(),
        }
    }
}

impl GenerationProvider for HttpGenerationProvider {
    fn generate(&self, diff: &str, max_new_tokens: u32) -> Result<String, ProviderError> {
        let mut response = self
            .agent
            .post(&self.endpoint)
            .send_json(serde_json::json!({
                "diff": diff,
                "max_new_tokens": max_new_tokens,
            }))
            .map_err(map_transport)?;
        let body: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::Protocol(e.to_string()))?;
        body.get("message")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ProviderError::Protocol("missing `message` field".into()))
    }
}

pub(crate) fn map_transport(err: ureq::Error) -> ProviderError {
    match err {
        ureq::Error::StatusCode(status) => ProviderError::Http { status },
        ureq::Error::Timeout(_) => ProviderError::Timeout,
        other => ProviderError::Transport(other.to_string()),
    }
}
