//! `psk ingest`: normalizes raw vulnerability and commit sources into the
//! corpus JSONL files every later stage consumes.

use std::path::{Path, PathBuf};

use clap::Args;
use psk_core::corpus::{ingest_commit_log, parse_nvd_feed, CommitRecord};

use crate::artifacts::{open_input, write_jsonl};
use crate::error::{CliError, CliResult};
use crate::gitrepo;
use crate::manifest::RunManifest;

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// NVD 2.0 JSON feed to convert into vulns.jsonl.
    #[arg(long)]
    pub nvd: Option<PathBuf>,

    /// Commit-log JSONL to validate into commits.jsonl.
    #[arg(long, conflicts_with = "repo")]
    pub commits: Option<PathBuf>,

    /// Local git checkout to read commits.jsonl from instead.
    #[arg(long)]
    pub repo: Option<PathBuf>,

    /// Newest commits to keep when reading with --repo.
    #[arg(long, requires = "repo")]
    pub max_commits: Option<usize>,

    /// Directory that receives vulns.jsonl / commits.jsonl and the manifest.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &IngestArgs) -> CliResult<()> {
    if args.nvd.is_none() && args.commits.is_none() && args.repo.is_none() {
        return Err(CliError::input(
            "nothing to ingest: pass --nvd, --commits, or --repo",
        ));
    }

    let mut inputs: Vec<&Path> = Vec::new();
    if let Some(nvd) = &args.nvd {
        inputs.push(nvd);
    }
    if let Some(commits) = &args.commits {
        inputs.push(commits);
    }
    let config = serde_json::json!({
        "nvd": args.nvd,
        "commits": args.commits,
        "repo": args.repo,
        "max_commits": args.max_commits,
        "out": args.out,
    });
    let mut manifest = RunManifest::start("ingest", config, &inputs)?;
    manifest.write(&args.out)?;

    if let Some(nvd) = &args.nvd {
        let ingest = parse_nvd_feed(open_input(nvd)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", nvd.display())))?;
        for diag in &ingest.diagnostics {
            log::warn!("{diag}");
        }
        let out_path = args.out.join("vulns.jsonl");
        write_jsonl(&out_path, &ingest.records)?;
        println!(
            "vulns.jsonl: {} records ({} skipped)",
            ingest.records.len(),
            ingest.skipped
        );
    }

    let commit_records: Option<(Vec<CommitRecord>, usize)> = match (&args.commits, &args.repo) {
        (Some(path), None) => {
            let ingest = ingest_commit_log(open_input(path)?)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            for diag in &ingest.diagnostics {
                log::warn!("{diag}");
            }
            Some((ingest.records, ingest.skipped))
        }
        (None, Some(repo)) => Some((gitrepo::load_repo(repo, args.max_commits)?, 0)),
        (None, None) => None,
        (Some(_), Some(_)) => unreachable!("clap rejects --commits with --repo"),
    };

    if let Some((records, skipped)) = commit_records {
        let out_path = args.out.join("commits.jsonl");
        write_jsonl(&out_path, &records)?;
        println!("commits.jsonl: {} records ({} skipped)", records.len(), skipped);
    }

    manifest.complete(&args.out)
}
