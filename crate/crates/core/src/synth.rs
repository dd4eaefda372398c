//! Deterministic synthetic corpora with known ground truth. Everything here
//! exists to exercise the pipeline in tests and benches; none of it touches
//! real vulnerability data.

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::corpus::{CommitRecord, LinkedPair, VulnRecord};

/// Shape of a generated corpus. Defaults produce the fully separable fixture:
/// each fixing commit repeats all of its CVE's content tokens and no other
/// commit shares any of them.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_cves: usize,
    /// Non-fixing commits per CVE; the fixing commit comes on top of these.
    pub negatives_per_cve: usize,
    /// Content tokens unique to each CVE, shared verbatim by its fixing commit.
    pub content_tokens: usize,
    /// Fraction of the fixing commit's content tokens replaced with filler,
    /// rounded down. 0.3 with 10 content tokens removes 3.
    pub perturb_fraction: f64,
    /// Upper bound on how many of the CVE's content tokens a non-fixing
    /// commit may leak. 0 keeps negatives fully disjoint from the query.
    pub max_negative_overlap: usize,
    /// Filler tokens appended to every non-fixing commit message.
    pub junk_per_negative: usize,
    /// Fraction of non-fixing commits whose message collapses to one word,
    /// for exercising the augmentation path.
    pub short_message_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_cves: 50,
            negatives_per_cve: 199,
            content_tokens: 10,
            perturb_fraction: 0.0,
            max_negative_overlap: 0,
            junk_per_negative: 40,
            short_message_fraction: 0.0,
            seed: 0,
        }
    }
}

/// A generated corpus plus its ground-truth links.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub vulns: Vec<VulnRecord>,
    pub commits: Vec<CommitRecord>,
    pub truth: Vec<LinkedPair>,
}

pub const SYNTH_REPO: &str = "local/synth/fixture";

/// Publication dates are spaced so that each CVE's one-year candidate window
/// contains exactly its own commits.
const CVE_SPACING_DAYS: i64 = 370;
/// Commits land between 300 and 1 days before their CVE's publication.
const COMMIT_SPREAD_DAYS: i64 = 300;

fn base_date() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2015, 1, 1, 12, 0, 0).unwrap()
}

/// 40 lowercase hex chars derived from a label.
pub fn synth_sha(label: &str) -> String {
    let digest = Sha256::digest(label.as_bytes());
    let mut out = String::with_capacity(40);
    for byte in digest.iter().take(20) {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

fn content_token(cve_idx: usize, tok_idx: usize) -> String {
    format!("c{cve_idx:03}w{tok_idx:02}")
}

/// Words every description starts with. They never appear in commit
/// messages, so they add query mass without creating overlap.
const QUERY_FILLER: [&str; 4] = ["improper", "validation", "flaw", "allows"];

/// Words every fixing commit carries and no other commit does. Queries do
/// not contain them either; a trained projection can exploit them, untrained
/// cosine cannot.
const FIX_MARKERS: [&str; 3] = ["patched", "hardened", "sanitize"];

/// Counterpart words carried by every non-fixing commit.
const NOISE_MARKERS: [&str; 3] = ["refactor", "cleanup", "tidy"];

fn small_diff(sha: &str, label: &str) -> String {
    format!(
        "--- a/src/{label}.c\n+++ b/src/{label}.c\n@@ -1,2 +1,2 @@\n-legacy body {}\n+updated body {}\n",
        &sha[..8],
        &sha[8..16]
    )
}

/// Builds the synthetic corpus described by `config`.
///
/// Layout per CVE: one fixing commit whose message repeats the CVE's content
/// tokens (minus the perturbed ones) plus the fix markers, and
/// `negatives_per_cve` commits made of junk tokens, noise markers, and at
/// most `max_negative_overlap` leaked content tokens.
pub fn separable_corpus(config: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut vulns = Vec::with_capacity(config.n_cves);
    let mut commits = Vec::new();
    let mut truth = Vec::with_capacity(config.n_cves);

    for c in 0..config.n_cves {
        let cve_id = format!("CVE-2015-{:04}", 1000 + c);
        let published_at = base_date() + Duration::days(c as i64 * CVE_SPACING_DAYS);
        let content: Vec<String> = (0..config.content_tokens)
            .map(|t| content_token(c, t))
            .collect();

        let description = format!("{} {}", QUERY_FILLER.join(" "), content.join(" "));
        vulns.push(VulnRecord {
            cve_id: cve_id.clone(),
            description,
            published_at,
            cwe_ids: vec!["CWE-20".into()],
            reference_urls: vec![],
        });

        // The fixing commit keeps (1 - perturb) of the content tokens.
        let kept = config.content_tokens
            - (config.content_tokens as f64 * config.perturb_fraction).floor() as usize;
        let fix_sha = synth_sha(&format!("fix-{c}"));
        let mut fix_words: Vec<String> = content.iter().take(kept).cloned().collect();
        for r in kept..config.content_tokens {
            fix_words.push(format!("swap{c:03}x{r:02}"));
        }
        fix_words.extend(FIX_MARKERS.iter().map(|s| s.to_string()));
        let fix_day = 1 + rng.random_range(0..COMMIT_SPREAD_DAYS);
        commits.push(CommitRecord {
            repo_id: SYNTH_REPO.into(),
            sha: fix_sha.clone(),
            message: fix_words.join(" "),
            diff: small_diff(&fix_sha, "core"),
            committed_at: published_at - Duration::days(fix_day),
            parent_count: 1,
        });
        truth.push(LinkedPair {
            cve_id: cve_id.clone(),
            sha: fix_sha,
            confidence: 1.0,
            is_ground_truth: true,
        });

        for n in 0..config.negatives_per_cve {
            let sha = synth_sha(&format!("neg-{c}-{n}"));
            let message = if rng.random::<f64>() < config.short_message_fraction {
                "fix".to_string()
            } else {
                let mut words: Vec<String> = Vec::new();
                if config.max_negative_overlap > 0 {
                    let leak = rng.random_range(0..=config.max_negative_overlap);
                    let mut picks: Vec<usize> = (0..config.content_tokens).collect();
                    picks.shuffle(&mut rng);
                    words.extend(picks.into_iter().take(leak).map(|t| content[t].clone()));
                }
                for _ in 0..config.junk_per_negative {
                    words.push(format!("n{:05}", rng.random_range(0..20000)));
                }
                words.extend(NOISE_MARKERS.iter().map(|s| s.to_string()));
                words.join(" ")
            };
            let day = 1 + rng.random_range(0..COMMIT_SPREAD_DAYS);
            let minute = rng.random_range(0..1440);
            commits.push(CommitRecord {
                repo_id: SYNTH_REPO.into(),
                sha: sha.clone(),
                message,
                diff: small_diff(&sha, "lib"),
                committed_at: published_at - Duration::days(day) - Duration::minutes(minute),
                parent_count: 1,
            });
        }
    }

    SynthCorpus {
        vulns,
        commits,
        truth,
    }
}

/// A straight line of `n` commits, one per hour ending at `end`, for window
/// arithmetic tests. The message and diff carry the commit's position.
pub fn commit_timeline(n: usize, end: DateTime<Utc>) -> Vec<CommitRecord> {
    (0..n)
        .map(|i| {
            let sha = synth_sha(&format!("timeline-{i}"));
            CommitRecord {
                repo_id: SYNTH_REPO.into(),
                sha: sha.clone(),
                message: format!("timeline commit {i} touches module m{:03}", i % 40),
                diff: small_diff(&sha, "timeline"),
                committed_at: end - Duration::hours((n - 1 - i) as i64),
                parent_count: 1,
            }
        })
        .collect()
}

/// Seeded points on the unit sphere, for index tests and benches.
pub fn random_unit_vectors(seed: u64, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            loop {
                let v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-6 {
                    return v.iter().map(|x| x / norm).collect();
                }
            }
        })
        .collect()
}
