//! `psk train`: mines hard negatives per vulnerability and fits the linear
//! projection head with contrastive SGD.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use psk_core::corpus::{CandidateSet, SplitName, VulnRecord};
use psk_core::embed::Embedder;
use psk_core::eval::GroundTruth;
use psk_core::lexical::build_posting_index;
use psk_core::textprep::{tokenize, AugmentedMessage, TokenStream};
use psk_core::train::{
    build_training_examples, mine_hard_negatives, train_projection, MiningConfig, TrainConfig,
    TrainingExample,
};

use crate::artifacts::{
    create_output, read_candidate_sets, read_messages, read_splits, read_truth_pairs, read_vulns,
};
use crate::config::EmbedderFlags;
use crate::error::{io_input, CliError, CliResult};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Vulnerability records JSONL.
    #[arg(long)]
    pub vulns: PathBuf,

    /// Candidate-set JSONL.
    #[arg(long)]
    pub candidates: PathBuf,

    /// Ground-truth links JSONL.
    #[arg(long)]
    pub truth: PathBuf,

    /// Augmentation-outcome JSONL supplying the candidate messages.
    #[arg(long)]
    pub messages: PathBuf,

    /// Dataset splits JSON; only the named split's CVEs are trained on.
    #[arg(long, requires = "split_name")]
    pub splits: Option<PathBuf>,

    /// Which split to train on.
    #[arg(long, value_enum)]
    pub split_name: Option<SplitChoice>,

    #[command(flatten)]
    pub embedder: EmbedderFlags,

    /// Hard-negative pool size per vulnerability.
    #[arg(long, default_value_t = 100)]
    pub top_n: usize,

    /// Hard negatives sampled per vulnerability.
    #[arg(long, default_value_t = 7)]
    pub negatives: usize,

    #[command(flatten)]
    pub train: TrainFlags,

    /// Output projection-head JSON.
    #[arg(long)]
    pub out: PathBuf,

    /// Optional JSON file receiving the per-epoch mean loss trace.
    #[arg(long)]
    pub loss_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SplitChoice {
    Train,
    Valid,
    Test,
}

impl From<SplitChoice> for SplitName {
    fn from(choice: SplitChoice) -> Self {
        match choice {
            SplitChoice::Train => SplitName::Train,
            SplitChoice::Valid => SplitName::Valid,
            SplitChoice::Test => SplitName::Test,
        }
    }
}

/// SGD hyperparameters, shared with the pipeline command.
#[derive(Debug, Clone, Args)]
pub struct TrainFlags {
    #[arg(long, default_value_t = 3)]
    pub epochs: usize,

    #[arg(long = "train-batch-size", default_value_t = 32)]
    pub train_batch_size: usize,

    /// SGD learning rate.
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,

    /// InfoNCE temperature.
    #[arg(long, default_value_t = 0.01)]
    pub tau: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Disable in-batch negatives.
    #[arg(long, default_value_t = false)]
    pub no_in_batch_negatives: bool,

    /// Projection output dimension.
    #[arg(long, default_value_t = 64)]
    pub d_out: usize,
}

impl TrainFlags {
    pub fn to_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.train_batch_size,
            learning_rate: self.lr,
            tau: self.tau,
            seed: self.seed,
            in_batch_negatives: !self.no_in_batch_negatives,
            d_out: self.d_out,
        }
    }
}

pub fn run(args: &TrainArgs) -> CliResult<()> {
    let vulns = read_vulns(&args.vulns)?;
    let candidate_sets = read_candidate_sets(&args.candidates)?;
    let truth_pairs = read_truth_pairs(&args.truth)?;
    let messages = read_messages(&args.messages)?;
    let truth = GroundTruth::from_pairs(&truth_pairs)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.truth.display())))?;

    let keep: Option<BTreeSet<String>> = match (&args.splits, args.split_name) {
        (Some(path), Some(choice)) => {
            let splits = read_splits(path)?;
            let want: SplitName = choice.into();
            let split = splits
                .into_iter()
                .find(|s| s.name == want)
                .ok_or_else(|| {
                    CliError::Input(format!("{}: no {want} split", path.display()))
                })?;
            Some(split.cve_ids)
        }
        _ => None,
    };

    let config = args.embedder.to_config()?;
    let embedder =
        psk_core::embed::make_embedder(&config).map_err(|e| CliError::Input(e.to_string()))?;
    let mining = MiningConfig {
        top_n: args.top_n,
        m: args.negatives,
        seed: args.train.seed,
    };

    let examples = collect_examples(
        &vulns,
        &candidate_sets,
        &truth,
        &messages,
        embedder.as_ref(),
        &mining,
        keep.as_ref(),
    )?;
    println!("train: {} contrastive examples", examples.len());

    let train_config = args.train.to_config();
    let report =
        train_projection(&examples, &train_config).map_err(|e| CliError::stage("train", e))?;

    let mut out = create_output(&args.out)?;
    report
        .head
        .save(&mut out)
        .map_err(|e| CliError::stage("train", e))?;
    out.flush().map_err(|e| io_input(&args.out, e))?;

    if let Some(loss_path) = &args.loss_out {
        let mut out = create_output(loss_path)?;
        serde_json::to_writer(&mut out, &report.epoch_mean_loss)
            .map_err(|e| CliError::Input(format!("{}: {e}", loss_path.display())))?;
        out.flush().map_err(|e| io_input(loss_path, e))?;
    }

    for (epoch, loss) in report.epoch_mean_loss.iter().enumerate() {
        println!("epoch {}: mean loss {loss:.6}", epoch + 1);
    }
    println!("head {} written to {}", report.head.id(), args.out.display());
    Ok(())
}

/// Gathers contrastive examples for every kept vulnerability that has at
/// least one in-candidates positive, in CVE id order.
pub fn collect_examples(
    vulns: &[VulnRecord],
    candidate_sets: &[CandidateSet],
    truth: &GroundTruth,
    messages: &BTreeMap<String, AugmentedMessage>,
    embedder: &dyn Embedder,
    mining: &MiningConfig,
    keep: Option<&BTreeSet<String>>,
) -> CliResult<Vec<TrainingExample>> {
    let by_cve: BTreeMap<&str, &CandidateSet> = candidate_sets
        .iter()
        .map(|s| (s.cve_id.as_str(), s))
        .collect();
    let vulns_by_id: BTreeMap<&str, &VulnRecord> =
        vulns.iter().map(|v| (v.cve_id.as_str(), v)).collect();

    let mut examples = Vec::new();
    for (cve_id, truth_shas) in &truth.by_cve {
        if keep.is_some_and(|k| !k.contains(cve_id)) {
            continue;
        }
        let Some(vuln) = vulns_by_id.get(cve_id.as_str()) else {
            log::warn!("{cve_id}: in truth but not in the vulnerability corpus, skipping");
            continue;
        };
        let Some(candidates) = by_cve.get(cve_id.as_str()) else {
            log::warn!("{cve_id}: no candidate set, skipping");
            continue;
        };
        if candidates.is_empty() {
            log::warn!("{cve_id}: empty candidate set, skipping");
            continue;
        }

        // Per-CVE lexical statistics: idf reflects this candidate pool.
        let docs: BTreeMap<String, TokenStream> = candidates
            .candidate_shas
            .iter()
            .map(|sha| {
                let message = messages.get(sha).ok_or_else(|| {
                    CliError::Input(format!("candidate {sha} has no message row"))
                })?;
                Ok((sha.clone(), tokenize(&message.combined)))
            })
            .collect::<CliResult<_>>()?;
        let lexical = build_posting_index(&docs);

        let positives: BTreeSet<String> = truth_shas
            .iter()
            .filter(|sha| candidates.contains(sha))
            .cloned()
            .collect();
        if positives.is_empty() {
            log::warn!("{cve_id}: no ground-truth commit among candidates, skipping");
            continue;
        }

        let negatives = mine_hard_negatives(
            vuln, candidates, messages, &lexical, embedder, truth_shas, mining,
        )
        .map_err(|e| CliError::stage("train", e))?;

        examples.extend(
            build_training_examples(
                cve_id,
                &vuln.description,
                &positives,
                &negatives,
                messages,
                embedder,
            )
            .map_err(|e| CliError::stage("train", e))?,
        );
    }
    Ok(examples)
}
