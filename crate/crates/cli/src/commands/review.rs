//! `psk review`: emits the manual-validation worksheet, one row per
//! top-ranked candidate with an empty label column for a human to fill.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::artifacts::{read_messages, write_jsonl};
use crate::commands::evaluate::{load_predictions, run_name_from};
use crate::error::{CliError, CliResult};

/// Characters kept from each message; enough to judge relevance at a glance.
const EXCERPT_CHARS: usize = 120;

#[derive(Debug, Args)]
pub struct ReviewArgs {
    /// Predictions JSONL.
    #[arg(long)]
    pub predictions: PathBuf,

    /// Rows kept per CVE.
    #[arg(long, default_value_t = 10)]
    pub top: usize,

    /// Augmentation-outcome JSONL used to fill message excerpts.
    #[arg(long)]
    pub messages: Option<PathBuf>,

    /// Output worksheet JSONL.
    #[arg(long)]
    pub out: PathBuf,
}

/// One worksheet row. `label` starts null; reviewers write their verdict in.
#[derive(Debug, Serialize, Deserialize)]
pub struct ReviewRow {
    pub cve_id: String,
    pub rank: usize,
    pub sha: String,
    pub score: f64,
    pub message_excerpt: String,
    pub label: Option<String>,
}

pub fn run(args: &ReviewArgs) -> CliResult<()> {
    if args.top == 0 {
        return Err(CliError::input("top must be at least 1"));
    }
    let predictions = load_predictions(&args.predictions, &run_name_from(&args.predictions))?;
    let messages = match &args.messages {
        Some(path) => Some(read_messages(path)?),
        None => None,
    };

    let mut rows = Vec::new();
    for list in predictions.by_cve.values() {
        for (i, entry) in list.entries.iter().take(args.top).enumerate() {
            let excerpt = messages
                .as_ref()
                .and_then(|m| m.get(&entry.sha))
                .map(|message| excerpt_of(&message.combined))
                .unwrap_or_default();
            rows.push(ReviewRow {
                cve_id: list.cve_id.clone(),
                rank: i + 1,
                sha: entry.sha.clone(),
                score: entry.score,
                message_excerpt: excerpt,
                label: None,
            });
        }
    }

    write_jsonl(&args.out, &rows)?;
    println!(
        "review: {} rows for {} CVEs (top {})",
        rows.len(),
        predictions.by_cve.len(),
        args.top
    );
    Ok(())
}

fn excerpt_of(text: &str) -> String {
    if text.chars().count() <= EXCERPT_CHARS {
        return text.to_string();
    }
    let cut: String = text.chars().take(EXCERPT_CHARS).collect();
    format!("{cut}…")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn excerpts_clip_long_text_on_character_boundaries() {
        let short = "fix overflow";
        assert_eq!(excerpt_of(short), short);

        let long = "ü".repeat(300);
        let cut = excerpt_of(&long);
        assert_eq!(cut.chars().count(), EXCERPT_CHARS + 1);
        assert!(cut.ends_with('…'));
    }
}
