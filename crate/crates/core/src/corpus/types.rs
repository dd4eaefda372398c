use std::collections::BTreeSet;
use std::sync::OnceLock;

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::CorpusError;

fn cve_id_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^CVE-\d{4}-\d{4,}$").unwrap())
}

fn cwe_id_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^CWE-\d+$").unwrap())
}

/// One NVD vulnerability entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnRecord {
    pub cve_id: String,
    /// The natural-language vulnerability description; the retrieval query.
    pub description: String,
    pub published_at: DateTime<Utc>,
    #[serde(default)]
    pub cwe_ids: Vec<String>,
    #[serde(default)]
    pub reference_urls: Vec<String>,
}

impl VulnRecord {
    /// Validates the id pattern, non-empty description, and CWE id shapes.
    pub fn validate(&self) -> Result<(), CorpusError> {
        if !cve_id_pattern().is_match(&self.cve_id) {
            return Err(CorpusError::InvalidRecord(format!(
                "cve_id {:?} does not match CVE-\\d{{4}}-\\d{{4,}}",
                self.cve_id
            )));
        }
        if self.description.trim().is_empty() {
            return Err(CorpusError::InvalidRecord(format!(
                "{}: empty description",
                self.cve_id
            )));
        }
        for cwe in &self.cwe_ids {
            if !cwe_id_pattern().is_match(cwe) {
                return Err(CorpusError::InvalidRecord(format!(
                    "{}: malformed CWE id {:?}",
                    self.cve_id, cwe
                )));
            }
        }
        Ok(())
    }
}

/// One repository commit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitRecord {
    /// `host/org/name`.
    pub repo_id: String,
    /// 40-char lowercase hex.
    pub sha: String,
    /// Developer-written message; may be empty.
    pub message: String,
    /// Unified diff, possibly truncated upstream.
    pub diff: String,
    pub committed_at: DateTime<Utc>,
    pub parent_count: u32,
}

impl CommitRecord {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if !is_valid_sha(&self.sha) {
            return Err(CorpusError::InvalidRecord(format!(
                "sha {:?} is not 40 lowercase hex chars",
                self.sha
            )));
        }
        Ok(())
    }
}

pub(crate) fn is_valid_sha(sha: &str) -> bool {
    sha.len() == 40 && sha.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
}

/// The commits eligible as fixing-commit candidates for one vulnerability.
///
/// `candidate_shas` is sorted by commit time descending, ties by sha
/// ascending. Every sha lies inside `[window_start, window_end]` except the
/// ones listed in `forced_shas`: ground-truth commits dated outside the
/// window that were force-included so the positive stays reachable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub cve_id: String,
    pub repo_id: String,
    pub window_start: DateTime<Utc>,
    pub window_end: DateTime<Utc>,
    pub candidate_shas: Vec<String>,
    /// Out-of-window ground-truth shas that were force-included; surfaced in reports.
    #[serde(default)]
    pub forced_shas: Vec<String>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidate_shas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidate_shas.is_empty()
    }

    pub fn contains(&self, sha: &str) -> bool {
        self.candidate_shas.iter().any(|s| s == sha)
    }
}

/// One vulnerability-to-commit link with its source confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedPair {
    pub cve_id: String,
    pub sha: String,
    pub confidence: f64,
    #[serde(default = "default_true")]
    pub is_ground_truth: bool,
}

fn default_true() -> bool {
    true
}

impl LinkedPair {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(CorpusError::InvalidRecord(format!(
                "{} -> {}: confidence {} outside [0,1]",
                self.cve_id, self.sha, self.confidence
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Valid,
    Test,
}

impl std::fmt::Display for SplitName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SplitName::Train => write!(f, "train"),
            SplitName::Valid => write!(f, "valid"),
            SplitName::Test => write!(f, "test"),
        }
    }
}

/// One named partition of the CVE universe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub name: SplitName,
    pub cve_ids: BTreeSet<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn vuln(id: &str, desc: &str) -> VulnRecord {
        VulnRecord {
            cve_id: id.to_string(),
            description: desc.to_string(),
            published_at: Utc.with_ymd_and_hms(2023, 3, 10, 21, 15, 0).unwrap(),
            cwe_ids: vec![],
            reference_urls: vec![],
        }
    }

    #[test]
    fn vuln_record_validation() {
        assert!(vuln("CVE-2023-27898", "Jenkins XSS").validate().is_ok());
        assert!(vuln("CVE-23-27898", "bad year").validate().is_err());
        assert!(vuln("CVE-2023-123", "too short a number").validate().is_err());
        assert!(vuln("CVE-2023-27898", "   ").validate().is_err());

        let mut v = vuln("CVE-2023-27898", "ok");
        v.cwe_ids = vec!["CWE-79".into()];
        assert!(v.validate().is_ok());
        v.cwe_ids = vec!["cwe-79".into()];
        assert!(v.validate().is_err());
    }

    #[test]
    fn sha_validation() {
        assert!(is_valid_sha(&"a".repeat(40)));
        assert!(is_valid_sha("59ac866d72a5c0dd3d3f64b57d5cb5e91a1f3161"));
        assert!(!is_valid_sha(&"a".repeat(39)));
        assert!(!is_valid_sha(&"A".repeat(40)));
        assert!(!is_valid_sha(&"g".repeat(40)));
    }

    #[test]
    fn linked_pair_confidence_bounds() {
        let mut pair = LinkedPair {
            cve_id: "CVE-2023-27898".into(),
            sha: "a".repeat(40),
            confidence: 0.9,
            is_ground_truth: true,
        };
        assert!(pair.validate().is_ok());
        pair.confidence = 1.2;
        assert!(pair.validate().is_err());
    }
}
