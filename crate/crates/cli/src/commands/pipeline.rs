//! `psk pipeline`: the end-to-end driver. Runs candidates, augmentation,
//! embedding, optional training, retrieval, and evaluation under one output
//! directory with a manifest recording exactly what ran.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use psk_core::corpus::{
    build_candidate_set_with_forced, split_dataset, CandidateSet, CommitRecord, SplitName,
    SplitRatios, VulnRecord,
};
use psk_core::embed::{make_embedder, Embedder, EmbeddingVector};
use psk_core::eval::{evaluate, GroundTruth};
use psk_core::index::save_vectors;
use psk_core::textprep::{augment_all, AugmentConfig, AugmentedMessage, CommitAugment, HttpGenerationProvider};
use psk_core::train::{train_projection, MiningConfig, ProjectionHead, TrainConfig};

use crate::artifacts::{create_output, read_commits, read_truth_pairs, read_vulns, write_jsonl};
use crate::commands::evaluate::write_report;
use crate::commands::retrieve::rank_all;
use crate::commands::train::collect_examples;
use crate::config::{
    normalize_k_grid, resolve_gen_endpoint, resolve_jobs, EmbedderFlags,
};
use crate::error::{io_input, CliError, CliResult};
use crate::manifest::RunManifest;
use crate::precomputed::PrecomputedEmbedder;

/// Run name stamped into predictions and the report; constant so repeated
/// invocations with identical inputs write identical bytes.
const RUN_NAME: &str = "pipeline";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

impl Toggle {
    pub fn is_on(self) -> bool {
        self == Toggle::On
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalSplit {
    Train,
    Valid,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Corpus directory holding vulns.jsonl and commits.jsonl.
    #[arg(long)]
    pub corpus: PathBuf,

    /// Ground-truth links JSONL.
    #[arg(long)]
    pub truth: PathBuf,

    /// Candidate window size in days before each publication date.
    #[arg(long, default_value_t = 365)]
    pub window_days: u32,

    #[command(flatten)]
    pub embedder: EmbedderFlags,

    /// Append generated summaries to brief commit messages.
    #[arg(long, value_enum, default_value = "on")]
    pub augment: Toggle,

    /// Train a projection head before retrieval.
    #[arg(long, value_enum, default_value = "off")]
    pub train: Toggle,

    /// Cutoffs evaluated in the report.
    #[arg(long, value_delimiter = ',', default_values_t = psk_core::eval::DEFAULT_K_GRID)]
    pub k: Vec<usize>,

    /// Seed driving splits, mining, and training.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output directory for every artifact of this run.
    #[arg(long)]
    pub out: PathBuf,

    /// Messages with fewer informative tokens than this get augmented.
    #[arg(long, default_value_t = 5)]
    pub min_tokens: usize,

    /// Generation endpoint URL (defaults to PSK_GEN_ENDPOINT); without one,
    /// summaries come from the deterministic diff template.
    #[arg(long)]
    pub gen_endpoint: Option<String>,

    /// Parallel provider calls (defaults to PSK_JOBS).
    #[arg(long)]
    pub jobs: Option<usize>,

    /// Hard-negative pool size per vulnerability.
    #[arg(long, default_value_t = 100)]
    pub top_n: usize,

    /// Hard negatives sampled per vulnerability.
    #[arg(long, default_value_t = 7)]
    pub negatives: usize,

    /// Passes over the training examples.
    #[arg(long, default_value_t = 3)]
    pub epochs: usize,

    /// Examples per SGD mini-batch.
    #[arg(long = "train-batch-size", default_value_t = 32)]
    pub train_batch_size: usize,

    /// SGD learning rate.
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,

    /// InfoNCE temperature.
    #[arg(long, default_value_t = 0.01)]
    pub tau: f64,

    /// Projection output dimension.
    #[arg(long, default_value_t = 64)]
    pub d_out: usize,

    /// Disable in-batch negatives.
    #[arg(long, default_value_t = false)]
    pub no_in_batch_negatives: bool,

    /// Split fractions "train,valid,test"; used only with --train on.
    #[arg(long, default_value = "0.8,0.1,0.1")]
    pub split_ratios: String,

    /// Split evaluated when training; without training the whole truth set
    /// is evaluated.
    #[arg(long, value_enum, default_value = "test")]
    pub eval_split: EvalSplit,
}

pub fn run(args: &PipelineArgs) -> CliResult<()> {
    let embed_config = args.embedder.to_config()?;
    let ks = normalize_k_grid(&args.k)?;
    let ratios = parse_ratios(&args.split_ratios)?;
    let jobs = resolve_jobs(args.jobs)?;
    let gen_endpoint = resolve_gen_endpoint(args.gen_endpoint.clone());

    let vulns_path = args.corpus.join("vulns.jsonl");
    let commits_path = args.corpus.join("commits.jsonl");
    let vulns = read_vulns(&vulns_path)?;
    let commits = read_commits(&commits_path)?;
    let truth_pairs = read_truth_pairs(&args.truth)?;
    let full_truth = GroundTruth::from_pairs(&truth_pairs)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.truth.display())))?;

    if commits.is_empty() {
        return Err(CliError::Input(format!(
            "{}: no commit records",
            commits_path.display()
        )));
    }
    let repos: BTreeSet<&str> = commits.iter().map(|c| c.repo_id.as_str()).collect();
    if repos.len() > 1 {
        return Err(CliError::Input(format!(
            "commits span {} repositories; candidate windows are per-repository, run once per repo",
            repos.len()
        )));
    }

    // The evaluated universe: truth CVEs that exist in the corpus.
    let vulns_by_id: BTreeMap<&str, &VulnRecord> =
        vulns.iter().map(|v| (v.cve_id.as_str(), v)).collect();
    let mut truth_map = full_truth.by_cve.clone();
    truth_map.retain(|cve_id, _| {
        let known = vulns_by_id.contains_key(cve_id.as_str());
        if !known {
            log::warn!("{cve_id}: in truth but not in the corpus, dropped from evaluation");
        }
        known
    });
    if truth_map.is_empty() {
        return Err(CliError::input(
            "no truth CVE appears in the corpus; nothing to evaluate",
        ));
    }
    let truth = GroundTruth::new(truth_map).expect("non-empty sets survive retain");

    let config_snapshot = serde_json::json!({
        "corpus": args.corpus,
        "truth": args.truth,
        "window_days": args.window_days,
        "embedder": args.embedder.describe(&embed_config),
        "augment": args.augment.is_on(),
        "train": args.train.is_on(),
        "k": ks,
        "seed": args.seed,
        "min_tokens": args.min_tokens,
        "gen_endpoint": gen_endpoint,
        "jobs": jobs,
        "mining": { "top_n": args.top_n, "m": args.negatives },
        "sgd": {
            "epochs": args.epochs,
            "batch_size": args.train_batch_size,
            "learning_rate": args.lr,
            "tau": args.tau,
            "d_out": args.d_out,
            "in_batch_negatives": !args.no_in_batch_negatives,
        },
        "split_ratios": args.split_ratios,
        "eval_split": format!("{:?}", args.eval_split).to_lowercase(),
    });
    let mut manifest = RunManifest::start(
        "pipeline",
        config_snapshot,
        &[&vulns_path, &commits_path, &args.truth],
    )?;
    manifest.write(&args.out)?;

    let stages = Stages {
        args,
        embed_config,
        ks,
        ratios,
        jobs,
        gen_endpoint,
        vulns_by_id,
        commits,
        truth,
    };
    match stages.run(&mut manifest) {
        Ok(()) => manifest.complete(&args.out),
        Err(e) => {
            manifest.fail(&args.out, e.stage_name().unwrap_or("input"));
            Err(e)
        }
    }
}

struct Stages<'a> {
    args: &'a PipelineArgs,
    embed_config: psk_core::embed::EmbedderConfig,
    ks: Vec<usize>,
    ratios: SplitRatios,
    jobs: usize,
    gen_endpoint: Option<String>,
    vulns_by_id: BTreeMap<&'a str, &'a VulnRecord>,
    commits: Vec<CommitRecord>,
    truth: GroundTruth,
}

impl Stages<'_> {
    fn run(&self, manifest: &mut RunManifest) -> CliResult<()> {
        let out_dir = &self.args.out;

        let candidate_sets = self.stage_candidates()?;
        write_jsonl(&out_dir.join("candidates.jsonl"), &candidate_sets)?;
        println!(
            "candidates: {} CVEs, {} rows",
            candidate_sets.len(),
            candidate_sets.iter().map(CandidateSet::len).sum::<usize>()
        );

        let messages = self.stage_augment(&candidate_sets, out_dir)?;

        let (doc_vectors, query_vectors) = self.stage_embed(&messages, out_dir)?;

        let head = if self.args.train.is_on() {
            let head = self.stage_train(&candidate_sets, &messages, &doc_vectors, &query_vectors, out_dir)?;
            manifest.amend("head_id", serde_json::json!(head.id()));
            manifest.write(out_dir)?;
            Some(head)
        } else {
            None
        };

        let eval_cves = self.eval_universe()?;
        let eval_sets: Vec<CandidateSet> = candidate_sets
            .iter()
            .filter(|s| eval_cves.contains(&s.cve_id))
            .cloned()
            .collect();

        let doc_map: BTreeMap<String, EmbeddingVector> = doc_vectors.iter().cloned().collect();
        let query_map: BTreeMap<String, EmbeddingVector> = query_vectors.iter().cloned().collect();
        let depth = *self.ks.last().expect("normalized grid is non-empty");
        let mut predictions = rank_all(&eval_sets, &doc_map, &query_map, head.as_ref(), depth)?;
        predictions.run = RUN_NAME.to_string();
        let predictions_path = out_dir.join("predictions.jsonl");
        let mut out = create_output(&predictions_path)?;
        predictions
            .to_jsonl(&mut out)
            .map_err(|e| CliError::stage("retrieve", e))?;
        out.flush().map_err(|e| io_input(&predictions_path, e))?;
        println!("retrieve: {} ranked lists, depth {depth}", eval_sets.len());

        let eval_truth = GroundTruth::new(
            self.truth
                .by_cve
                .iter()
                .filter(|(cve, _)| eval_cves.contains(*cve))
                .map(|(cve, shas)| (cve.clone(), shas.clone()))
                .collect(),
        )
        .map_err(|e| CliError::stage("evaluate", e))?;
        let report = evaluate(&predictions, &eval_truth, &self.ks)
            .map_err(|e| CliError::stage("evaluate", e))?;
        write_report(&out_dir.join("report.json"), &report)?;
        print!("{}", report.text_table());
        Ok(())
    }

    fn stage_candidates(&self) -> CliResult<Vec<CandidateSet>> {
        let mut sets = Vec::with_capacity(self.truth.len());
        for (cve_id, truth_shas) in &self.truth.by_cve {
            let vuln = self.vulns_by_id[cve_id.as_str()];
            let known: Vec<String> = truth_shas.iter().cloned().collect();
            let set = build_candidate_set_with_forced(
                vuln,
                &self.commits,
                self.args.window_days,
                &known,
            )
            .map_err(|e| CliError::stage("candidates", e))?;
            if set.is_empty() {
                log::warn!("{cve_id}: no candidates in window");
            }
            sets.push(set);
        }
        Ok(sets)
    }

    fn stage_augment(
        &self,
        candidate_sets: &[CandidateSet],
        out_dir: &std::path::Path,
    ) -> CliResult<BTreeMap<String, AugmentedMessage>> {
        let wanted: BTreeSet<&str> = candidate_sets
            .iter()
            .flat_map(|s| s.candidate_shas.iter().map(String::as_str))
            .collect();
        let subset: Vec<CommitRecord> = self
            .commits
            .iter()
            .filter(|c| wanted.contains(c.sha.as_str()))
            .cloned()
            .collect();

        let mut outcomes: Vec<CommitAugment> = if self.args.augment.is_on() {
            let provider = self
                .gen_endpoint
                .as_deref()
                .map(|url| HttpGenerationProvider::new(url, self.embed_config.timeout_secs));
            let config = AugmentConfig {
                min_tokens: self.args.min_tokens,
                jobs: self.jobs,
                ..AugmentConfig::default()
            };
            let run = augment_all(
                &subset,
                provider
                    .as_ref()
                    .map(|p| p as &dyn psk_core::textprep::GenerationProvider),
                &config,
            );
            let total = subset.len().max(1);
            println!(
                "augment: {} of {} commits augmented ({:.1}%), {} fallback, {} provider failures",
                run.augmented_count,
                subset.len(),
                100.0 * run.augmented_count as f64 / total as f64,
                run.fallback_count,
                run.provider_failures
            );
            run.outcomes
        } else {
            println!("augment: off, {} messages pass through", subset.len());
            subset
                .iter()
                .map(|c| CommitAugment {
                    sha: c.sha.clone(),
                    message: AugmentedMessage::original_only(&c.message),
                    used_fallback: false,
                    provider_failed: false,
                    degenerate_empty_diff: false,
                })
                .collect()
        };
        outcomes.sort_by(|a, b| a.sha.cmp(&b.sha));
        write_jsonl(&out_dir.join("augmented.jsonl"), &outcomes)?;

        Ok(outcomes
            .into_iter()
            .map(|o| (o.sha, o.message))
            .collect())
    }

    /// Embeds every distinct text once, then fans vectors out per id.
    fn stage_embed(
        &self,
        messages: &BTreeMap<String, AugmentedMessage>,
        out_dir: &std::path::Path,
    ) -> CliResult<(Vec<(String, EmbeddingVector)>, Vec<(String, EmbeddingVector)>)> {
        let embedder =
            make_embedder(&self.embed_config).map_err(|e| CliError::Input(e.to_string()))?;

        let mut texts: BTreeSet<&str> =
            messages.values().map(|m| m.combined.as_str()).collect();
        for cve_id in self.truth.by_cve.keys() {
            texts.insert(&self.vulns_by_id[cve_id.as_str()].description);
        }
        let by_text = embed_unique(embedder.as_ref(), &texts, self.embed_config.batch_size)
            .map_err(|e| CliError::stage("embed", e))?;

        let doc_vectors: Vec<(String, EmbeddingVector)> = messages
            .iter()
            .map(|(sha, m)| (sha.clone(), by_text[m.combined.as_str()].clone()))
            .collect();
        let query_vectors: Vec<(String, EmbeddingVector)> = self
            .truth
            .by_cve
            .keys()
            .map(|cve_id| {
                let description = self.vulns_by_id[cve_id.as_str()].description.as_str();
                (cve_id.clone(), by_text[description].clone())
            })
            .collect();

        write_vector_file(&out_dir.join("vectors.jsonl"), &doc_vectors)?;
        write_vector_file(&out_dir.join("query_vectors.jsonl"), &query_vectors)?;
        println!(
            "embed: {} distinct texts, {} message vectors, {} query vectors",
            by_text.len(),
            doc_vectors.len(),
            query_vectors.len()
        );
        Ok((doc_vectors, query_vectors))
    }

    fn stage_train(
        &self,
        candidate_sets: &[CandidateSet],
        messages: &BTreeMap<String, AugmentedMessage>,
        doc_vectors: &[(String, EmbeddingVector)],
        query_vectors: &[(String, EmbeddingVector)],
        out_dir: &std::path::Path,
    ) -> CliResult<ProjectionHead> {
        let splits = self.make_splits()?;
        let splits_path = out_dir.join("splits.json");
        let mut out = create_output(&splits_path)?;
        serde_json::to_writer_pretty(&mut out, &splits)
            .map_err(|e| CliError::Input(format!("{}: {e}", splits_path.display())))?;
        out.write_all(b"\n")
            .and_then(|()| out.flush())
            .map_err(|e| io_input(&splits_path, e))?;

        let train_cves = &splits
            .iter()
            .find(|s| s.name == SplitName::Train)
            .expect("split_dataset always emits a train split")
            .cve_ids;

        // Replay the embed stage's vectors; no provider is contacted again.
        let table = doc_vectors
            .iter()
            .map(|(sha, v)| (messages[sha].combined.clone(), v.clone()))
            .chain(query_vectors.iter().map(|(cve_id, v)| {
                (
                    self.vulns_by_id[cve_id.as_str()].description.clone(),
                    v.clone(),
                )
            }));
        let embedder = PrecomputedEmbedder::new(table, self.embed_config.kind)
            .map_err(|e| CliError::stage("train", e))?;

        let mining = MiningConfig {
            top_n: self.args.top_n,
            m: self.args.negatives,
            seed: self.args.seed,
        };
        let examples = collect_examples(
            &self.vulns(),
            candidate_sets,
            &self.truth,
            messages,
            &embedder,
            &mining,
            Some(train_cves),
        )?;
        println!(
            "train: {} contrastive examples from {} training CVEs",
            examples.len(),
            train_cves.len()
        );

        let config = TrainConfig {
            epochs: self.args.epochs,
            batch_size: self.args.train_batch_size,
            learning_rate: self.args.lr,
            tau: self.args.tau,
            seed: self.args.seed,
            in_batch_negatives: !self.args.no_in_batch_negatives,
            d_out: self.args.d_out,
        };
        let report =
            train_projection(&examples, &config).map_err(|e| CliError::stage("train", e))?;
        for (epoch, loss) in report.epoch_mean_loss.iter().enumerate() {
            println!("epoch {}: mean loss {loss:.6}", epoch + 1);
        }

        let head_path = out_dir.join("head.json");
        let mut out = create_output(&head_path)?;
        report
            .head
            .save(&mut out)
            .map_err(|e| CliError::stage("train", e))?;
        out.flush().map_err(|e| io_input(&head_path, e))?;

        let loss_path = out_dir.join("loss.json");
        let mut out = create_output(&loss_path)?;
        serde_json::to_writer(&mut out, &report.epoch_mean_loss)
            .map_err(|e| CliError::Input(format!("{}: {e}", loss_path.display())))?;
        out.flush().map_err(|e| io_input(&loss_path, e))?;

        Ok(report.head)
    }

    fn vulns(&self) -> Vec<VulnRecord> {
        self.vulns_by_id.values().map(|v| (*v).clone()).collect()
    }

    fn make_splits(&self) -> CliResult<Vec<psk_core::corpus::DatasetSplit>> {
        let ids: Vec<String> = self.truth.by_cve.keys().cloned().collect();
        split_dataset(&ids, self.ratios, self.args.seed)
            .map_err(|e| CliError::stage("train", e))
    }

    /// CVEs the report covers: a named split under --train on, everything
    /// otherwise.
    fn eval_universe(&self) -> CliResult<BTreeSet<String>> {
        if !self.args.train.is_on() {
            return Ok(self.truth.by_cve.keys().cloned().collect());
        }
        let want = match self.args.eval_split {
            EvalSplit::All => return Ok(self.truth.by_cve.keys().cloned().collect()),
            EvalSplit::Train => SplitName::Train,
            EvalSplit::Valid => SplitName::Valid,
            EvalSplit::Test => SplitName::Test,
        };
        let splits = self.make_splits()?;
        let split = splits
            .into_iter()
            .find(|s| s.name == want)
            .expect("split_dataset emits all three splits");
        if split.cve_ids.is_empty() {
            return Err(CliError::stage(
                "evaluate",
                format!("the {want} split is empty; adjust --split-ratios"),
            ));
        }
        Ok(split.cve_ids)
    }
}

fn embed_unique(
    embedder: &dyn Embedder,
    texts: &BTreeSet<&str>,
    batch_size: usize,
) -> Result<BTreeMap<String, EmbeddingVector>, psk_core::embed::EmbedError> {
    let list: Vec<String> = texts.iter().map(|t| t.to_string()).collect();
    let mut map = BTreeMap::new();
    for chunk in list.chunks(batch_size.max(1)) {
        let vectors = embedder.embed_batch(chunk)?;
        for (text, vector) in chunk.iter().zip(vectors) {
            map.insert(text.clone(), vector);
        }
    }
    Ok(map)
}

fn write_vector_file(
    path: &std::path::Path,
    pairs: &[(String, EmbeddingVector)],
) -> CliResult<()> {
    let mut out = create_output(path)?;
    save_vectors(&mut out, pairs).map_err(|e| CliError::stage("embed", e))?;
    out.flush().map_err(|e| io_input(path, e))
}

fn parse_ratios(raw: &str) -> CliResult<SplitRatios> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 3 {
        return Err(CliError::Input(format!(
            "split-ratios must be three comma-separated fractions, got {raw:?}"
        )));
    }
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Input(format!("split-ratios fraction {s:?} is not a number")))
    };
    let ratios = SplitRatios {
        train: parse(parts[0])?,
        valid: parse(parts[1])?,
        test: parse(parts[2])?,
    };
    ratios
        .validate()
        .map_err(|e| CliError::Input(e.to_string()))?;
    Ok(ratios)
}
