//! `psk augment`: appends generated summaries to brief commit messages and
//! records the outcome per commit.

use std::path::PathBuf;

use clap::Args;
use psk_core::textprep::{augment_all, AugmentConfig, HttpGenerationProvider};

use crate::artifacts::{read_commits, write_jsonl};
use crate::config::{resolve_gen_endpoint, resolve_jobs, resolve_timeout};
use crate::error::CliResult;

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Commit records JSONL.
    #[arg(long)]
    pub commits: PathBuf,

    /// Messages with fewer informative tokens than this get augmented.
    #[arg(long, default_value_t = 5)]
    pub min_tokens: usize,

    /// Whitespace-token cap on the diff sent to the generator.
    #[arg(long, default_value_t = 100)]
    pub max_diff_tokens: usize,

    /// Length hint forwarded to the generation provider.
    #[arg(long, default_value_t = 64)]
    pub max_new_tokens: u32,

    /// Generation endpoint URL (defaults to PSK_GEN_ENDPOINT); without one,
    /// summaries come from the deterministic diff template.
    #[arg(long)]
    pub gen_endpoint: Option<String>,

    /// Provider HTTP timeout in seconds (defaults to PSK_TIMEOUT_SECS).
    #[arg(long)]
    pub timeout_secs: Option<u64>,

    /// Parallel provider calls (defaults to PSK_JOBS).
    #[arg(long)]
    pub jobs: Option<usize>,

    /// Output augmentation-outcome JSONL, one row per commit, sorted by sha.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &AugmentArgs) -> CliResult<()> {
    let commits = read_commits(&args.commits)?;
    let config = AugmentConfig {
        min_tokens: args.min_tokens,
        max_diff_tokens: args.max_diff_tokens,
        max_new_tokens: args.max_new_tokens,
        jobs: resolve_jobs(args.jobs)?,
    };
    let timeout = resolve_timeout(args.timeout_secs)?;
    let endpoint = resolve_gen_endpoint(args.gen_endpoint.clone());
    let provider = endpoint
        .as_deref()
        .map(|url| HttpGenerationProvider::new(url, timeout));

    let run = augment_all(
        &commits,
        provider
            .as_ref()
            .map(|p| p as &dyn psk_core::textprep::GenerationProvider),
        &config,
    );

    let mut outcomes = run.outcomes;
    outcomes.sort_by(|a, b| a.sha.cmp(&b.sha));
    write_jsonl(&args.out, &outcomes)?;

    let total = outcomes.len().max(1);
    println!(
        "augment: {} commits, {} augmented ({:.1}%), {} fallback, {} provider failures, {} empty-diff",
        outcomes.len(),
        run.augmented_count,
        100.0 * run.augmented_count as f64 / total as f64,
        run.fallback_count,
        run.provider_failures,
        run.degenerate_count
    );
    Ok(())
}
