//! Command line driver for the retrieval engine: corpus ingestion, candidate
//! windows, message augmentation, embedding, contrastive training, ranking,
//! evaluation, and the end-to-end pipeline.

mod artifacts;
mod commands;
mod config;
mod error;
mod gitrepo;
mod manifest;
mod precomputed;

pub use error::{CliError, CliResult};

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "psk",
    version,
    about = "Maps vulnerability reports to the commits that fixed them."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize NVD feeds and commit logs into corpus JSONL files.
    Ingest(commands::ingest::IngestArgs),
    /// Build per-CVE temporal candidate sets.
    Candidates(commands::candidates::CandidatesArgs),
    /// Append generated summaries to brief commit messages.
    Augment(commands::augment::AugmentArgs),
    /// Embed commit messages or vulnerability descriptions into vectors.
    Embed(commands::embed::EmbedArgs),
    /// Mine hard negatives and train the projection head.
    Train(commands::train::TrainArgs),
    /// Rank candidates for each CVE over precomputed vectors.
    Retrieve(commands::retrieve::RetrieveArgs),
    /// Score predictions against ground truth.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Split rank-1 wins across runs into overlap regions.
    Compare(commands::compare::CompareArgs),
    /// Emit the manual-validation worksheet for top-ranked candidates.
    Review(commands::review::ReviewArgs),
    /// Run candidates, augment, embed, train, retrieve, and evaluate.
    Pipeline(commands::pipeline::PipelineArgs),
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Ingest(args) => commands::ingest::run(args),
        Command::Candidates(args) => commands::candidates::run(args),
        Command::Augment(args) => commands::augment::run(args),
        Command::Embed(args) => commands::embed::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Retrieve(args) => commands::retrieve::run(args),
        Command::Evaluate(args) => commands::evaluate::run(args),
        Command::Compare(args) => commands::compare::run(args),
        Command::Review(args) => commands::review::run(args),
        Command::Pipeline(args) => commands::pipeline::run(args),
    }
}

/// Binary entry point. Exit codes: 0 success, 2 usage or input error,
/// 3 stage failure. Clap's own usage errors also exit with 2.
pub fn run() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = dispatch(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_parses_every_subcommand_shape() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_with_code_two() {
        let err = Cli::try_parse_from(["psk", "no-such-command"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = Cli::try_parse_from(["psk"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn pipeline_flags_parse_per_the_documented_contract() {
        let cli = Cli::try_parse_from([
            "psk",
            "pipeline",
            "--corpus",
            "corpus",
            "--truth",
            "truth.jsonl",
            "--window-days",
            "365",
            "--embedder",
            "hash",
            "--dim",
            "256",
            "--augment",
            "on",
            "--train",
            "off",
            "--k",
            "1,5,10",
            "--seed",
            "7",
            "--out",
            "out",
        ])
        .unwrap();
        match cli.command {
            Command::Pipeline(args) => {
                assert_eq!(args.window_days, 365);
                assert_eq!(args.k, vec![1, 5, 10]);
                assert_eq!(args.seed, 7);
                assert!(args.augment.is_on());
                assert!(!args.train.is_on());
            }
            other => panic!("parsed {other:?}"),
        }
    }
}
