//! Shared flag groups and their resolution against PSK_* environment
//! variables. Precedence everywhere: flag > environment > built-in default.

use clap::{Args, ValueEnum};
use psk_core::embed::{EmbedderConfig, EmbedderKind};

use crate::error::{CliError, CliResult};

pub const ENV_EMBED_ENDPOINT: &str = "PSK_EMBED_ENDPOINT";
pub const ENV_GEN_ENDPOINT: &str = "PSK_GEN_ENDPOINT";
pub const ENV_TIMEOUT_SECS: &str = "PSK_TIMEOUT_SECS";
pub const ENV_JOBS: &str = "PSK_JOBS";

pub const DEFAULT_TIMEOUT_SECS: u64 = 30;
pub const DEFAULT_JOBS: usize = 4;

fn env_string(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.trim().is_empty())
}

fn env_parsed<T: std::str::FromStr>(name: &str) -> CliResult<Option<T>> {
    match env_string(name) {
        None => Ok(None),
        Some(raw) => raw
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Input(format!("{name} is not a valid value: {raw:?}"))),
    }
}

/// Timeout for provider HTTP calls: flag, else PSK_TIMEOUT_SECS, else 30.
/// The environment is consulted only when the flag is absent, so a broken
/// variable cannot fail a run that overrides it.
pub fn resolve_timeout(flag: Option<u64>) -> CliResult<u64> {
    let resolved = match flag {
        Some(v) => v,
        None => env_parsed(ENV_TIMEOUT_SECS)?.unwrap_or(DEFAULT_TIMEOUT_SECS),
    };
    Ok(resolved)
}

/// Parallel provider calls: flag, else PSK_JOBS, else 4.
pub fn resolve_jobs(flag: Option<usize>) -> CliResult<usize> {
    let jobs = match flag {
        Some(v) => v,
        None => env_parsed(ENV_JOBS)?.unwrap_or(DEFAULT_JOBS),
    };
    if jobs == 0 {
        return Err(CliError::input("jobs must be at least 1"));
    }
    Ok(jobs)
}

/// Generation endpoint: flag, else PSK_GEN_ENDPOINT, else none (fallback
/// template generation).
pub fn resolve_gen_endpoint(flag: Option<String>) -> Option<String> {
    flag.or_else(|| env_string(ENV_GEN_ENDPOINT))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmbedderChoice {
    Hash,
    External,
}

impl From<EmbedderChoice> for EmbedderKind {
    fn from(choice: EmbedderChoice) -> Self {
        match choice {
            EmbedderChoice::Hash => EmbedderKind::Hash,
            EmbedderChoice::External => EmbedderKind::External,
        }
    }
}

/// Embedding backend knobs, shared by every command that embeds text.
#[derive(Debug, Clone, Args)]
pub struct EmbedderFlags {
    /// Embedding backend.
    #[arg(long, value_enum, default_value = "hash")]
    pub embedder: EmbedderChoice,

    /// Embedding dimension.
    #[arg(long, default_value_t = 256)]
    pub dim: usize,

    /// External embedding endpoint URL (defaults to PSK_EMBED_ENDPOINT).
    #[arg(long)]
    pub endpoint: Option<String>,

    /// Model name forwarded to the external provider.
    #[arg(long, default_value = "default")]
    pub model: String,

    /// Inputs per embedding request.
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,

    /// Retries per failed embedding request.
    #[arg(long, default_value_t = 2)]
    pub retry_count: u32,

    /// Provider HTTP timeout in seconds (defaults to PSK_TIMEOUT_SECS).
    #[arg(long)]
    pub timeout_secs: Option<u64>,
}

impl EmbedderFlags {
    pub fn to_config(&self) -> CliResult<EmbedderConfig> {
        let config = EmbedderConfig {
            kind: self.embedder.into(),
            dim: self.dim,
            endpoint: self
                .endpoint
                .clone()
                .or_else(|| env_string(ENV_EMBED_ENDPOINT)),
            timeout_secs: resolve_timeout(self.timeout_secs)?,
            batch_size: self.batch_size,
            retry_count: self.retry_count,
            model: self.model.clone(),
        };
        config
            .validate()
            .map_err(|e| CliError::Input(e.to_string()))?;
        Ok(config)
    }

    /// Manifest snapshot of the resolved embedding knobs.
    pub fn describe(&self, config: &EmbedderConfig) -> serde_json::Value {
        serde_json::json!({
            "kind": config.kind.to_string(),
            "dim": config.dim,
            "endpoint": config.endpoint,
            "model": config.model,
            "batch_size": config.batch_size,
            "retry_count": config.retry_count,
            "timeout_secs": config.timeout_secs,
        })
    }
}

/// Parses and validates a K grid flag: positive, deduplicated, ascending.
pub fn normalize_k_grid(ks: &[usize]) -> CliResult<Vec<usize>> {
    if ks.is_empty() {
        return Err(CliError::input("k list must not be empty"));
    }
    let mut out: Vec<usize> = ks.to_vec();
    if out.iter().any(|&k| k == 0) {
        return Err(CliError::input("k values must be at least 1"));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_grid_normalization_sorts_and_dedupes() {
        assert_eq!(normalize_k_grid(&[10, 1, 5, 10]).unwrap(), vec![1, 5, 10]);
        assert!(normalize_k_grid(&[]).is_err());
        assert!(normalize_k_grid(&[3, 0]).is_err());
    }

    #[test]
    fn flag_beats_default_for_timeout_and_jobs() {
        // Environment-variable fallbacks are covered by the binary-level
        // integration tests; mutating the process environment here would race
        // with parallel tests.
        assert_eq!(resolve_timeout(Some(7)).unwrap(), 7);
        assert_eq!(resolve_jobs(Some(2)).unwrap(), 2);
        assert!(resolve_jobs(Some(0)).is_err());
    }

    #[test]
    fn hash_config_resolves_without_an_endpoint() {
        let flags = EmbedderFlags {
            embedder: EmbedderChoice::Hash,
            dim: 64,
            endpoint: None,
            model: "default".into(),
            batch_size: 16,
            retry_count: 2,
            timeout_secs: Some(5),
        };
        let config = flags.to_config().unwrap();
        assert_eq!(config.kind, EmbedderKind::Hash);
        assert_eq!(config.dim, 64);
        assert_eq!(config.timeout_secs, 5);
    }
}
