use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::diff::{fallback_generate, truncate_diff};
use super::provider::GenerationProvider;
use super::tokenize::tokenize;
use crate::corpus::CommitRecord;

/// Where the combined text of a commit message came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageSource {
    OriginalOnly,
    GeneratedAppended,
}

/// A commit message together with its optional generated summary.
///
/// Invariant: `generated` absent means `combined == original`; present means
/// `combined == original + " [generated] " + generated`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedMessage {
    pub original: String,
    pub generated: Option<String>,
    pub combined: String,
    pub source: MessageSource,
}

impl AugmentedMessage {
    pub fn original_only(original: &str) -> Self {
        Self {
            original: original.to_string(),
            generated: None,
            combined: original.to_string(),
            source: MessageSource::OriginalOnly,
        }
    }

    pub fn with_generated(original: &str, generated: String) -> Self {
        let combined = format!("{original} [generated] {generated}");
        Self {
            original: original.to_string(),
            generated: Some(generated),
            combined,
            source: MessageSource::GeneratedAppended,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentConfig {
    /// A message with fewer informative tokens than this gets augmented.
    pub min_tokens: usize,
    /// Whitespace-token cap applied to the diff sent to the provider.
    pub max_diff_tokens: usize,
    /// Length hint forwarded to the external provider.
    pub max_new_tokens: u32,
    /// Bounded parallelism for provider calls.
    pub jobs: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            min_tokens: 5,
            max_diff_tokens: 100,
            max_new_tokens: 64,
            jobs: 4,
        }
    }
}

/// Augmentation outcome for one commit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitAugment {
    pub sha: String,
    pub message: AugmentedMessage,
    /// Generated text came from the local template rather than a provider.
    pub used_fallback: bool,
    /// An external provider call failed or broke the wire contract.
    pub provider_failed: bool,
    /// Message was short but the diff was empty, so nothing could be added.
    pub degenerate_empty_diff: bool,
}

/// Aggregate outcome over a commit set. Outcomes keep input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentRun {
    pub outcomes: Vec<CommitAugment>,
    pub augmented_count: usize,
    pub fallback_count: usize,
    pub provider_failures: usize,
    pub degenerate_count: usize,
}

fn reference_token() -> &'static Regex {
    static REF: OnceLock<Regex> = OnceLock::new();
    REF.get_or_init(|| Regex::new(r"^(?:[a-z]+-\d+|#\d+|\d+)$").expect("valid pattern"))
}

/// Counts tokens that are not issue references or bare numbers.
pub fn informative_token_count(message: &str) -> usize {
    tokenize(message)
        .tokens
        .iter()
        .filter(|t| !reference_token().is_match(t))
        .count()
}

/// True when the message carries fewer than `min_tokens` informative tokens
/// and should be augmented with a generated summary.
pub fn needs_augmentation(message: &str, min_tokens: usize) -> bool {
    informative_token_count(message) < min_tokens
}

/// Augments one commit message when it is too brief to retrieve against.
///
/// A brief message gets a provider-generated summary of the truncated diff
/// appended; provider failures (and blank provider output) degrade to the
/// deterministic template. `provider: None` uses the template directly.
pub fn augment_message(
    commit: &CommitRecord,
    provider: Option<&dyn GenerationProvider>,
    cfg: &AugmentConfig,
) -> CommitAugment {
    let original = commit.message.as_str();
    if !needs_augmentation(original, cfg.min_tokens) {
        return CommitAugment {
            sha: commit.sha.clone(),
            message: AugmentedMessage::original_only(original),
            used_fallback: false,
            provider_failed: false,
            degenerate_empty_diff: false,
        };
    }

    if commit.diff.trim().is_empty() {
        log::warn!(
            "commit {} has a brief message and an empty diff, keeping it as is",
            commit.sha
        );
        return CommitAugment {
            sha: commit.sha.clone(),
            message: AugmentedMessage::original_only(original),
            used_fallback: false,
            provider_failed: false,
            degenerate_empty_diff: true,
        };
    }

    let truncated = truncate_diff(&commit.diff, cfg.max_diff_tokens);
    let mut used_fallback = false;
    let mut provider_failed = false;
    let generated = match provider {
        Some(p) => match p.generate(truncated, cfg.max_new_tokens) {
            Ok(text) if !text.trim().is_empty() => text,
            Ok(_) => {
                log::warn!("provider returned a blank summary for {}", commit.sha);
                provider_failed = true;
                used_fallback = true;
                fallback_generate(&commit.diff)
            }
            Err(e) => {
                log::warn!("generation provider failed for {}: {e}", commit.sha);
                provider_failed = true;
                used_fallback = true;
                fallback_generate(&commit.diff)
            }
        },
        None => {
            used_fallback = true;
            fallback_generate(&commit.diff)
        }
    };

    CommitAugment {
        sha: commit.sha.clone(),
        message: AugmentedMessage::with_generated(original, generated),
        used_fallback,
        provider_failed,
        degenerate_empty_diff: false,
    }
}

/// Augments every commit with bounded parallelism, preserving input order.
pub fn augment_all(
    commits: &[CommitRecord],
    provider: Option<&dyn GenerationProvider>,
    cfg: &AugmentConfig,
) -> AugmentRun {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .expect("augmentation thread pool");
    let outcomes: Vec<CommitAugment> = pool.install(|| {
        commits
            .par_iter()
            .map(|c| augment_message(c, provider, cfg))
            .collect()
    });

    let augmented_count = outcomes
        .iter()
        .filter(|o| o.message.source == MessageSource::GeneratedAppended)
        .count();
    let fallback_count = outcomes.iter().filter(|o| o.used_fallback).count();
    let provider_failures = outcomes.iter().filter(|o| o.provider_failed).count();
    let degenerate_count = outcomes.iter().filter(|o| o.degenerate_empty_diff).count();
    AugmentRun {
        outcomes,
        augmented_count,
        fallback_count,
        provider_failures,
        degenerate_count,
    }
}
