//! `psk candidates`: builds the temporal candidate set for every
//! vulnerability from a single-repository commit corpus.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use clap::Args;
use psk_core::corpus::{build_candidate_set_with_forced, filter_by_cwe, CandidateSet};

use crate::artifacts::{read_commits, read_truth_pairs, read_vulns, write_jsonl};
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct CandidatesArgs {
    /// Vulnerability records JSONL.
    #[arg(long)]
    pub vulns: PathBuf,

    /// Commit records JSONL; all commits must share one repository.
    #[arg(long)]
    pub commits: PathBuf,

    /// Known vulnerability-to-commit links JSONL; out-of-window fixing
    /// commits are force-included and flagged.
    #[arg(long)]
    pub truth: Option<PathBuf>,

    /// Candidate window size in days before each publication date.
    #[arg(long, default_value_t = 365)]
    pub window_days: u32,

    /// Keep only vulnerabilities annotated with one of these CWE ids.
    #[arg(long, value_delimiter = ',')]
    pub cwe: Vec<String>,

    /// Output candidate-set JSONL.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &CandidatesArgs) -> CliResult<()> {
    let mut vulns = read_vulns(&args.vulns)?;
    let commits = read_commits(&args.commits)?;
    if args.window_days == 0 {
        return Err(CliError::input("window-days must be at least 1"));
    }
    if commits.is_empty() {
        return Err(CliError::Input(format!(
            "{}: no commit records",
            args.commits.display()
        )));
    }
    let repos: BTreeSet<&str> = commits.iter().map(|c| c.repo_id.as_str()).collect();
    if repos.len() > 1 {
        return Err(CliError::Input(format!(
            "commits span {} repositories ({}); candidate windows are per-repository, run once per repo",
            repos.len(),
            repos.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }

    if !args.cwe.is_empty() {
        let allowed: BTreeSet<String> = args.cwe.iter().cloned().collect();
        let before = vulns.len();
        vulns = filter_by_cwe(&vulns, &allowed);
        println!("cwe filter kept {} of {before} vulnerabilities", vulns.len());
    }

    let mut known: BTreeMap<String, Vec<String>> = BTreeMap::new();
    if let Some(truth_path) = &args.truth {
        for pair in read_truth_pairs(truth_path)? {
            known.entry(pair.cve_id).or_default().push(pair.sha);
        }
    }

    vulns.sort_by(|a, b| a.cve_id.cmp(&b.cve_id));
    let mut sets: Vec<CandidateSet> = Vec::with_capacity(vulns.len());
    let mut forced_total = 0usize;
    let mut empty_total = 0usize;
    for vuln in &vulns {
        let known_shas = known.get(&vuln.cve_id).cloned().unwrap_or_default();
        let set =
            build_candidate_set_with_forced(vuln, &commits, args.window_days, &known_shas)
                .map_err(|e| CliError::stage("candidates", e))?;
        forced_total += set.forced_shas.len();
        if set.is_empty() {
            empty_total += 1;
            log::warn!("{}: no candidates in window", vuln.cve_id);
        }
        sets.push(set);
    }

    write_jsonl(&args.out, &sets)?;
    println!(
        "candidates: {} vulnerabilities, {} candidate rows, {} forced, {} empty",
        sets.len(),
        sets.iter().map(CandidateSet::len).sum::<usize>(),
        forced_total,
        empty_total
    );
    Ok(())
}
