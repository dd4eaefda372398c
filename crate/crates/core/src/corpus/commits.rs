use std::io::{BufRead, BufReader, Read};

use chrono::{DateTime, Utc};
use serde::Deserialize;

use super::types::CommitRecord;
use super::CorpusError;

/// Outcome of ingesting a commit log. Totality: `records.len() + skipped`
/// equals the number of non-blank input lines.
#[derive(Debug, Default)]
pub struct CommitIngest {
    pub records: Vec<CommitRecord>,
    pub skipped: usize,
    pub diagnostics: Vec<String>,
}

#[derive(Deserialize)]
struct CommitLine {
    repo: String,
    sha: String,
    message: String,
    #[serde(default)]
    diff: String,
    committed_at: DateTime<Utc>,
    #[serde(default)]
    parents: Vec<String>,
}

/// Reads a JSON-lines commit log. Each line holds one commit object with
/// keys `repo`, `sha`, `message`, `diff`, `committed_at`, `parents`.
///
/// Blank lines are ignored. A line that fails to parse or validate is
/// skipped with a diagnostic naming its 1-based line number.
pub fn ingest_commit_log<R: Read>(raw: R) -> Result<CommitIngest, CorpusError> {
    let reader = BufReader::new(raw);
    let mut out = CommitIngest::default();

    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line) {
            Ok(record) => out.records.push(record),
            Err(reason) => {
                let diag = format!("skipping commit log line {}: {reason}", n + 1);
                log::warn!("{diag}");
                out.diagnostics.push(diag);
                out.skipped += 1;
            }
        }
    }
    Ok(out)
}

fn parse_line(line: &str) -> Result<CommitRecord, String> {
    let parsed: CommitLine = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let record = CommitRecord {
        repo_id: parsed.repo,
        sha: parsed.sha,
        message: parsed.message,
        diff: parsed.diff,
        committed_at: parsed.committed_at,
        parent_count: parsed.parents.len() as u32,
    };
    record.validate().map_err(|e| e.to_string())?;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{"repo": "jenkinsci/jenkins", "sha": "0991dfa0e0da0f32cd03e40cf8ea3809410cec03", "message": "Fix XSS", "diff": "--- a/x\n+++ b/x\n", "committed_at": "2023-03-08T12:00:00Z", "parents": ["aaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa"]}"#;

    #[test]
    fn ingests_valid_lines() {
        let input = format!("{GOOD}\n\n{GOOD2}\n");
        let out = ingest_commit_log(input.as_bytes()).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.skipped, 0);
        assert_eq!(out.records[0].parent_count, 1);
        assert_eq!(out.records[1].parent_count, 2);
    }

    const GOOD2: &str = r#"{"repo": "jenkinsci/jenkins", "sha": "52648ee2b9dca9fbee2bff9b37dba827339dfd5c", "message": "Merge branch", "diff": "", "committed_at": "2023-03-09T12:00:00Z", "parents": ["aaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa", "bbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbbb"]}"#;

    #[test]
    fn bad_lines_are_skipped_with_line_numbers() {
        let input = format!("{GOOD}\nnot json\n{{\"repo\": \"r\", \"sha\": \"tooshort\", \"message\": \"m\", \"committed_at\": \"2023-01-01T00:00:00Z\"}}\n");
        let out = ingest_commit_log(input.as_bytes()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.skipped, 2);
        assert!(out.diagnostics[0].contains("line 2"));
        assert!(out.diagnostics[1].contains("line 3"));
    }

    #[test]
    fn missing_diff_defaults_to_empty() {
        let line = r#"{"repo": "r/r", "sha": "cccccccccccccccccccccccccccccccccccccccc", "message": "m", "committed_at": "2023-01-01T00:00:00Z", "parents": []}"#;
        let out = ingest_commit_log(line.as_bytes()).unwrap();
        assert_eq!(out.records[0].diff, "");
        assert_eq!(out.records[0].parent_count, 0);
    }
}
