//! Reads commit history out of a local git checkout via the `git` binary.

use std::path::Path;
use std::process::Command;

use chrono::{DateTime, Utc};
use psk_core::corpus::CommitRecord;

use crate::error::{CliError, CliResult};

/// Diffs larger than this are truncated; huge vendored-blob commits would
/// otherwise dominate memory and add no retrieval signal.
const MAX_DIFF_BYTES: usize = 1_000_000;

/// Record separator / unit separator keep multi-line commit messages intact.
const RS: char = '\x1e';
const US: char = '\x1f';

fn run_git(repo: &Path, args: &[&str]) -> CliResult<String> {
    let output = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(args)
        .output()
        .map_err(|e| CliError::Input(format!("running git on {}: {e}", repo.display())))?;
    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        return Err(CliError::Input(format!(
            "git {} failed in {}: {}",
            args.first().copied().unwrap_or(""),
            repo.display(),
            stderr.trim()
        )));
    }
    String::from_utf8(output.stdout)
        .map_err(|_| CliError::Input(format!("git output in {} is not UTF-8", repo.display())))
}

/// Derives an `owner/name`-style repository id from the origin remote URL,
/// falling back to the checkout directory name.
pub fn repo_identifier(repo: &Path) -> String {
    if let Ok(url) = run_git(repo, &["remote", "get-url", "origin"]) {
        let url = url.trim().trim_end_matches(".git");
        let tail: Vec<&str> = url
            .rsplit(|c| c == '/' || c == ':')
            .take(2)
            .collect();
        if tail.len() == 2 && !tail[0].is_empty() && !tail[1].is_empty() {
            return format!("{}/{}", tail[1], tail[0]);
        }
    }
    let name = repo
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "repo".to_string());
    format!("local/{name}")
}

/// Loads every commit reachable from HEAD, most recent first, diffs included.
pub fn load_repo(repo: &Path, max_commits: Option<usize>) -> CliResult<Vec<CommitRecord>> {
    let repo_id = repo_identifier(repo);
    let format = format!("%H{US}%cI{US}%P{US}%B{RS}");
    let mut args = vec!["log".to_string(), format!("--format={format}")];
    if let Some(n) = max_commits {
        args.push(format!("--max-count={n}"));
    }
    let arg_refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let log = run_git(repo, &arg_refs)?;

    let mut records = Vec::new();
    for entry in log.split(RS) {
        let entry = entry.trim_start_matches(['\n', '\r']);
        if entry.is_empty() {
            continue;
        }
        let fields: Vec<&str> = entry.splitn(4, US).collect();
        if fields.len() != 4 {
            return Err(CliError::Input(format!(
                "unexpected git log entry in {}",
                repo.display()
            )));
        }
        let sha = fields[0].trim().to_string();
        let committed_at: DateTime<Utc> = fields[1]
            .trim()
            .parse::<DateTime<chrono::FixedOffset>>()
            .map_err(|e| CliError::Input(format!("commit {sha}: bad date: {e}")))?
            .with_timezone(&Utc);
        let parent_count = fields[2].split_whitespace().count() as u32;
        let message = fields[3].trim_end().to_string();
        let diff = load_diff(repo, &sha)?;
        records.push(CommitRecord {
            repo_id: repo_id.clone(),
            sha,
            message,
            diff,
            committed_at,
            parent_count,
        });
    }
    Ok(records)
}

fn load_diff(repo: &Path, sha: &str) -> CliResult<String> {
    let text = run_git(repo, &["show", "--format=", "--patch", sha])?;
    if text.len() > MAX_DIFF_BYTES {
        let mut cut = MAX_DIFF_BYTES;
        while !text.is_char_boundary(cut) {
            cut -= 1;
        }
        Ok(text[..cut].to_string())
    } else {
        Ok(text)
    }
}
