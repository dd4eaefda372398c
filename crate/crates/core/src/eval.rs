//! Ranking metrics over per-vulnerability prediction lists: Recall@K, MRR,
//! Manual Effort@K, Precision@K, plus rank-1 overlap regions across runs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::LinkedPair;
use crate::index::RankedList;

/// The K values reported by default: 1 through 10, then 20, 50, 100.
pub const DEFAULT_K_GRID: [usize; 13] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 20, 50, 100];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("truth lists CVEs absent from predictions: {}", .0.join(", "))]
    MissingCves(Vec<String>),
    #[error("{0}: empty truth set")]
    EmptyTruthSet(String),
    #[error("duplicate prediction list for {0}")]
    DuplicateCve(String),
    #[error("invalid ranked list: {0}")]
    InvalidList(String),
    #[error("runs cover different CVE universes: {0}")]
    UniverseMismatch(String),
    #[error("overlap needs at least 2 runs, got {0}")]
    TooFewRuns(usize),
    #[error("overlap regions explode beyond {0} runs")]
    TooManyRuns(usize),
    #[error("malformed predictions: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The reference links each vulnerability must retrieve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub by_cve: BTreeMap<String, BTreeSet<String>>,
}

impl GroundTruth {
    pub fn new(by_cve: BTreeMap<String, BTreeSet<String>>) -> Result<Self, EvalError> {
        for (cve, shas) in &by_cve {
            if shas.is_empty() {
                return Err(EvalError::EmptyTruthSet(cve.clone()));
            }
        }
        Ok(Self { by_cve })
    }

    /// Collects ground-truth pairs into per-CVE sha sets; rows flagged as
    /// non-ground-truth are skipped.
    pub fn from_pairs(pairs: &[LinkedPair]) -> Result<Self, EvalError> {
        let mut by_cve: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for pair in pairs {
            if !pair.is_ground_truth {
                continue;
            }
            by_cve
                .entry(pair.cve_id.clone())
                .or_default()
                .insert(pair.sha.clone());
        }
        Self::new(by_cve)
    }

    pub fn len(&self) -> usize {
        self.by_cve.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_cve.is_empty()
    }
}

/// One system's ranked predictions for a set of vulnerabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPredictions {
    pub run: String,
    pub by_cve: BTreeMap<String, RankedList>,
}

impl RunPredictions {
    pub fn new(run: &str) -> Self {
        Self {
            run: run.to_string(),
            by_cve: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, list: RankedList) -> Result<(), EvalError> {
        list.check_invariants().map_err(EvalError::InvalidList)?;
        if self.by_cve.contains_key(&list.cve_id) {
            return Err(EvalError::DuplicateCve(list.cve_id));
        }
        self.by_cve.insert(list.cve_id.clone(), list);
        Ok(())
    }

    /// One RankedList JSON object per line, in CVE id order.
    pub fn to_jsonl<W: Write>(&self, mut out: W) -> Result<(), EvalError> {
        for list in self.by_cve.values() {
            serde_json::to_writer(&mut out, list).map_err(|e| EvalError::Corrupt(e.to_string()))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn from_jsonl<R: Read>(run: &str, input: R) -> Result<Self, EvalError> {
        let mut preds = Self::new(run);
        for (lineno, line) in BufReader::new(input).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let list: RankedList = serde_json::from_str(&line)
                .map_err(|e| EvalError::Corrupt(format!("line {}: {e}", lineno + 1)))?;
            preds.insert(list)?;
        }
        Ok(preds)
    }
}

/// Per-K metric row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtK {
    pub k: usize,
    pub recall: f64,
    pub precision: f64,
    pub manual_effort: f64,
}

/// Rank detail for one vulnerability; kept out of the JSON report.
#[derive(Debug, Clone, PartialEq)]
pub struct PerCveDetail {
    pub cve_id: String,
    /// 1-based rank of the first true commit, if any was retrieved.
    pub first_rank: Option<usize>,
    pub truth_size: usize,
    pub list_len: usize,
}

/// Aggregated metrics for one prediction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub run: String,
    pub num_queries: usize,
    pub mrr: f64,
    pub at_k: Vec<AtK>,
    #[serde(skip)]
    pub per_cve: Vec<PerCveDetail>,
}

impl MetricReport {
    /// Fixed-width table of the per-K rows, one line per K.
    pub fn text_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "run: {}  queries: {}", self.run, self.num_queries);
        let _ = writeln!(out, "mrr: {:.4}", self.mrr);
        let _ = writeln!(out, "{:>5} {:>10} {:>10} {:>14}", "k", "recall", "precision", "manual_effort");
        for row in &self.at_k {
            let _ = writeln!(
                out,
                "{:>5} {:>10.4} {:>10.4} {:>14.4}",
                row.k, row.recall, row.precision, row.manual_effort
            );
        }
        out
    }
}

/// The ranked entries evaluated for one CVE, paired with its truth set.
struct Scored<'a> {
    list: &'a RankedList,
    truth: &'a BTreeSet<String>,
}

/// Pairs every truth CVE with its prediction list. The evaluated universe is
/// exactly the truth keys; extra prediction lists are ignored.
fn align<'a>(
    preds: &'a RunPredictions,
    truth: &'a GroundTruth,
) -> Result<Vec<Scored<'a>>, EvalError> {
    let missing: Vec<String> = truth
        .by_cve
        .keys()
        .filter(|cve| !preds.by_cve.contains_key(*cve))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingCves(missing));
    }
    Ok(truth
        .by_cve
        .iter()
        .map(|(cve, shas)| Scored {
            list: &preds.by_cve[cve],
            truth: shas,
        })
        .collect())
}

fn hits_in_top_k(s: &Scored, k: usize) -> usize {
    s.list
        .entries
        .iter()
        .take(k)
        .filter(|e| s.truth.contains(&e.sha))
        .count()
}

fn first_rank(s: &Scored) -> Option<usize> {
    s.list
        .entries
        .iter()
        .position(|e| s.truth.contains(&e.sha))
        .map(|idx| idx + 1)
}

/// Mean over CVEs of |truth ∩ top-k| / |truth|.
pub fn recall_at_k(
    preds: &RunPredictions,
    truth: &GroundTruth,
    k: usize,
) -> Result<f64, EvalError> {
    debug_assert!(k >= 1);
    let scored = align(preds, truth)?;
    let sum: f64 = scored
        .iter()
        .map(|s| hits_in_top_k(s, k) as f64 / s.truth.len() as f64)
        .sum();
    Ok(sum / scored.len() as f64)
}

/// Mean over CVEs of whether any true commit appears in the top k.
pub fn recall_at_k_any_hit(
    preds: &RunPredictions,
    truth: &GroundTruth,
    k: usize,
) -> Result<f64, EvalError> {
    debug_assert!(k >= 1);
    let scored = align(preds, truth)?;
    let sum: f64 = scored
        .iter()
        .map(|s| if hits_in_top_k(s, k) > 0 { 1.0 } else { 0.0 })
        .sum();
    Ok(sum / scored.len() as f64)
}

/// Mean reciprocal rank of the first true commit; 0 for a CVE whose truth
/// never appears in its list.
pub fn mrr(preds: &RunPredictions, truth: &GroundTruth) -> Result<f64, EvalError> {
    let scored = align(preds, truth)?;
    let sum: f64 = scored
        .iter()
        .map(|s| first_rank(s).map_or(0.0, |r| 1.0 / r as f64))
        .sum();
    Ok(sum / scored.len() as f64)
}

/// Mean over CVEs of min(first rank, k): how many entries a reviewer reads
/// before hitting a true commit, capped at k.
pub fn manual_effort_at_k(
    preds: &RunPredictions,
    truth: &GroundTruth,
    k: usize,
) -> Result<f64, EvalError> {
    debug_assert!(k >= 1);
    let scored = align(preds, truth)?;
    let sum: f64 = scored
        .iter()
        .map(|s| first_rank(s).map_or(k, |r| r.min(k)) as f64)
        .sum();
    Ok(sum / scored.len() as f64)
}

/// Mean over CVEs of |truth ∩ top-k| / k; the denominator stays k even when
/// the list is shorter.
pub fn precision_at_k(
    preds: &RunPredictions,
    truth: &GroundTruth,
    k: usize,
) -> Result<f64, EvalError> {
    debug_assert!(k >= 1);
    let scored = align(preds, truth)?;
    let sum: f64 = scored
        .iter()
        .map(|s| hits_in_top_k(s, k) as f64 / k as f64)
        .sum();
    Ok(sum / scored.len() as f64)
}

/// All four metrics across the K grid, plus per-CVE rank details.
pub fn evaluate(
    preds: &RunPredictions,
    truth: &GroundTruth,
    ks: &[usize],
) -> Result<MetricReport, EvalError> {
    let scored = align(preds, truth)?;
    let at_k = ks
        .iter()
        .map(|&k| {
            Ok(AtK {
                k,
                recall: recall_at_k(preds, truth, k)?,
                precision: precision_at_k(preds, truth, k)?,
                manual_effort: manual_effort_at_k(preds, truth, k)?,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    let per_cve = truth
        .by_cve
        .iter()
        .zip(scored.iter())
        .map(|((cve, shas), s)| PerCveDetail {
            cve_id: cve.clone(),
            first_rank: first_rank(s),
            truth_size: shas.len(),
            list_len: s.list.entries.len(),
        })
        .collect();
    Ok(MetricReport {
        run: preds.run.clone(),
        num_queries: truth.len(),
        mrr: mrr(preds, truth)?,
        at_k,
        per_cve,
    })
}

/// One exclusive region of the rank-1 overlap diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapRegion {
    pub count: usize,
    pub cve_ids: Vec<String>,
}

/// Exclusive rank-1-correct regions across runs. Keys are the member run
/// names sorted and joined with "&"; every one of the 2^n - 1 regions is
/// present, including empty ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub regions: BTreeMap<String, OverlapRegion>,
}

/// Which CVEs each run solves at rank 1, split into exclusive regions.
pub fn overlap_report(
    runs: &[&RunPredictions],
    truth: &GroundTruth,
) -> Result<OverlapReport, EvalError> {
    if runs.len() < 2 {
        return Err(EvalError::TooFewRuns(runs.len()));
    }
    if runs.len() > 16 {
        return Err(EvalError::TooManyRuns(16));
    }
    let mut correct: Vec<BTreeSet<&str>> = Vec::with_capacity(runs.len());
    for run in runs {
        let scored = align(run, truth)?;
        correct.push(
            truth
                .by_cve
                .keys()
                .zip(scored.iter())
                .filter(|(_, s)| {
                    s.list
                        .entries
                        .first()
                        .is_some_and(|top| s.truth.contains(&top.sha))
                })
                .map(|(cve, _)| cve.as_str())
                .collect(),
        );
    }

    let mut regions = BTreeMap::new();
    for mask in 1u32..(1 << runs.len()) {
        let members: Vec<usize> = (0..runs.len()).filter(|i| mask & (1 << i) != 0).collect();
        let mut names: Vec<&str> = members.iter().map(|&i| runs[i].run.as_str()).collect();
        names.sort_unstable();
        let key = names.join("&");

        let cve_ids: Vec<String> = truth
            .by_cve
            .keys()
            .filter(|cve| {
                (0..runs.len()).all(|i| correct[i].contains(cve.as_str()) == members.contains(&i))
            })
            .cloned()
            .collect();
        if regions
            .insert(
                key.clone(),
                OverlapRegion {
                    count: cve_ids.len(),
                    cve_ids,
                },
            )
            .is_some()
        {
            return Err(EvalError::UniverseMismatch(format!(
                "duplicate run name in region {key}"
            )));
        }
    }
    Ok(OverlapReport { regions })
}
