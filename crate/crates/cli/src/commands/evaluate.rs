//! `psk evaluate`: scores a prediction run against ground truth across the
//! K grid and reports recall, precision, MRR, and manual effort.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use psk_core::eval::{
    evaluate, recall_at_k_any_hit, GroundTruth, MetricReport, RunPredictions, DEFAULT_K_GRID,
};

use crate::artifacts::{create_output, open_input, read_truth_pairs};
use crate::config::normalize_k_grid;
use crate::error::{io_input, CliError, CliResult};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predictions JSONL, one ranked list per CVE.
    #[arg(long)]
    pub predictions: PathBuf,

    /// Ground-truth links JSONL.
    #[arg(long)]
    pub truth: PathBuf,

    /// Cutoffs to evaluate at.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_K_GRID)]
    pub k: Vec<usize>,

    /// Run name in the report; defaults to the predictions file stem.
    #[arg(long)]
    pub run: Option<String>,

    /// Also print the any-hit recall variant (first relevant commit found
    /// counts the CVE as fully recalled).
    #[arg(long, default_value_t = false)]
    pub any_hit: bool,

    /// Optional path for the metric report JSON.
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

/// A file's stem as the default run name.
pub fn run_name_from(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".to_string())
}

pub fn load_predictions(path: &Path, run: &str) -> CliResult<RunPredictions> {
    let reader = open_input(path)?;
    RunPredictions::from_jsonl(run, reader)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn load_truth(path: &Path) -> CliResult<GroundTruth> {
    let pairs = read_truth_pairs(path)?;
    GroundTruth::from_pairs(&pairs)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn write_report(path: &Path, report: &MetricReport) -> CliResult<()> {
    let mut out = create_output(path)?;
    serde_json::to_writer_pretty(&mut out, report)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    out.write_all(b"\n")
        .and_then(|()| out.flush())
        .map_err(|e| io_input(path, e))
}

pub fn run(args: &EvaluateArgs) -> CliResult<()> {
    let run_name = args
        .run
        .clone()
        .unwrap_or_else(|| run_name_from(&args.predictions));
    let predictions = load_predictions(&args.predictions, &run_name)?;
    let truth = load_truth(&args.truth)?;
    let ks = normalize_k_grid(&args.k)?;

    let report =
        evaluate(&predictions, &truth, &ks).map_err(|e| CliError::Input(e.to_string()))?;
    print!("{}", report.text_table());

    if args.any_hit {
        for &k in &ks {
            let value = recall_at_k_any_hit(&predictions, &truth, k)
                .map_err(|e| CliError::Input(e.to_string()))?;
            println!("any-hit recall@{k}: {value:.4}");
        }
    }

    if let Some(path) = &args.json_out {
        write_report(path, &report)?;
        println!("report written to {}", path.display());
    }
    Ok(())
}
