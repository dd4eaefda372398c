use std::cmp::Reverse;
use std::collections::BTreeSet;

use chrono::Duration;

use super::types::{CandidateSet, CommitRecord, VulnRecord};
use super::CorpusError;

/// Builds the temporal candidate set for one vulnerability: every commit
/// whose committer date falls in `[published_at - window_days, published_at]`
/// (both ends inclusive).
///
/// All commits must come from a single repository. Candidates are ordered
/// newest first; equal timestamps fall back to ascending sha so the order is
/// total.
pub fn build_candidate_set(
    vuln: &VulnRecord,
    commits: &[CommitRecord],
    window_days: u32,
) -> Result<CandidateSet, CorpusError> {
    build_candidate_set_with_forced(vuln, commits, window_days, &[])
}

/// Same as [`build_candidate_set`], but any known fixing sha that exists in
/// `commits` yet falls outside the window is added anyway and recorded in
/// `forced_shas`. Evaluation against ground truth would otherwise be capped
/// below 1.0 through no fault of the retriever.
pub fn build_candidate_set_with_forced(
    vuln: &VulnRecord,
    commits: &[CommitRecord],
    window_days: u32,
    known_shas: &[String],
) -> Result<CandidateSet, CorpusError> {
    if window_days == 0 {
        return Err(CorpusError::InvalidWindow(window_days));
    }
    let repo_id = single_repo(commits)?;

    let window_end = vuln.published_at;
    let window_start = window_end - Duration::days(i64::from(window_days));

    let mut seen = BTreeSet::new();
    let mut in_window: Vec<&CommitRecord> = Vec::new();
    let mut forced: Vec<&CommitRecord> = Vec::new();
    for commit in commits {
        if !seen.insert(commit.sha.as_str()) {
            log::warn!("duplicate sha {} in commit list, keeping first", commit.sha);
            continue;
        }
        if commit.committed_at >= window_start && commit.committed_at <= window_end {
            in_window.push(commit);
        } else if known_shas.iter().any(|s| s == &commit.sha) {
            log::warn!(
                "known fixing commit {} for {} is outside the {window_days}-day window, forcing it in",
                commit.sha,
                vuln.cve_id
            );
            forced.push(commit);
        }
    }

    let mut all: Vec<&CommitRecord> = in_window;
    all.extend(forced.iter().copied());
    all.sort_by_key(|c| (Reverse(c.committed_at), c.sha.clone()));

    let mut forced_shas: Vec<String> = forced.iter().map(|c| c.sha.clone()).collect();
    forced_shas.sort();

    Ok(CandidateSet {
        cve_id: vuln.cve_id.clone(),
        repo_id,
        window_start,
        window_end,
        candidate_shas: all.iter().map(|c| c.sha.clone()).collect(),
        forced_shas,
    })
}

fn single_repo(commits: &[CommitRecord]) -> Result<String, CorpusError> {
    let first = commits
        .first()
        .ok_or_else(|| CorpusError::InvalidRecord("empty commit list".into()))?;
    for c in commits {
        if c.repo_id != first.repo_id {
            return Err(CorpusError::MixedRepos {
                first: first.repo_id.clone(),
                second: c.repo_id.clone(),
            });
        }
    }
    Ok(first.repo_id.clone())
}

/// Keeps vulnerability records whose CWE list intersects `allowed`.
/// Records with no CWE annotation are dropped.
pub fn filter_by_cwe(records: &[VulnRecord], allowed: &BTreeSet<String>) -> Vec<VulnRecord> {
    records
        .iter()
        .filter(|r| r.cwe_ids.iter().any(|c| allowed.contains(c)))
        .cloned()
        .collect()
}
