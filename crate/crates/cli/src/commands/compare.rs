//! `psk compare`: splits rank-1 wins across runs into exclusive overlap
//! regions, the tabular form of a Venn diagram.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use psk_core::eval::{overlap_report, RunPredictions};

use crate::artifacts::create_output;
use crate::commands::evaluate::{load_predictions, load_truth, run_name_from};
use crate::error::{io_input, CliError, CliResult};

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Two or more prediction JSONL files; each file stem names its run.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub runs: Vec<PathBuf>,

    /// Ground-truth links JSONL.
    #[arg(long)]
    pub truth: PathBuf,

    /// Optional path for the overlap report JSON.
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

pub fn run(args: &CompareArgs) -> CliResult<()> {
    if args.runs.len() < 2 {
        return Err(CliError::input("compare needs at least two --runs files"));
    }
    let mut names = BTreeSet::new();
    let mut loaded: Vec<RunPredictions> = Vec::with_capacity(args.runs.len());
    for path in &args.runs {
        let name = run_name_from(path);
        if !names.insert(name.clone()) {
            return Err(CliError::Input(format!(
                "two prediction files share the run name {name:?}; rename one"
            )));
        }
        loaded.push(load_predictions(path, &name)?);
    }
    let truth = load_truth(&args.truth)?;

    let refs: Vec<&RunPredictions> = loaded.iter().collect();
    let report =
        overlap_report(&refs, &truth).map_err(|e| CliError::Input(e.to_string()))?;

    println!("rank-1 overlap over {} CVEs:", truth.len());
    for (region, detail) in &report.regions {
        println!("{:>6}  {region}", detail.count);
    }

    if let Some(path) = &args.json_out {
        let mut out = create_output(path)?;
        serde_json::to_writer_pretty(&mut out, &report)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        out.write_all(b"\n")
            .and_then(|()| out.flush())
            .map_err(|e| io_input(path, e))?;
        println!("overlap report written to {}", path.display());
    }
    Ok(())
}
