//! `psk embed`: turns texts into dense vectors, keyed by sha for commit
//! messages or by CVE id for vulnerability descriptions.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use psk_core::embed::{make_embedder, EmbeddingVector};
use psk_core::index::save_vectors;

use crate::artifacts::{create_output, read_messages, read_vulns};
use crate::config::EmbedderFlags;
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Augmentation-outcome JSONL; embeds each combined message, keyed by sha.
    #[arg(long, conflicts_with = "vulns", required_unless_present = "vulns")]
    pub augmented: Option<PathBuf>,

    /// Vulnerability records JSONL; embeds each description, keyed by CVE id.
    #[arg(long)]
    pub vulns: Option<PathBuf>,

    #[command(flatten)]
    pub embedder: EmbedderFlags,

    /// Output vectors JSONL, sorted by id.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &EmbedArgs) -> CliResult<()> {
    let config = args.embedder.to_config()?;
    let embedder = make_embedder(&config).map_err(|e| CliError::Input(e.to_string()))?;

    // (id, text), already sorted by id by the map/sort below.
    let items: Vec<(String, String)> = match (&args.augmented, &args.vulns) {
        (Some(path), None) => read_messages(path)?
            .into_iter()
            .map(|(sha, message)| (sha, message.combined))
            .collect(),
        (None, Some(path)) => {
            let mut vulns = read_vulns(path)?;
            vulns.sort_by(|a, b| a.cve_id.cmp(&b.cve_id));
            vulns
                .into_iter()
                .map(|v| (v.cve_id, v.description))
                .collect()
        }
        _ => unreachable!("clap enforces exactly one input source"),
    };

    let mut vectors: Vec<(String, EmbeddingVector)> = Vec::with_capacity(items.len());
    for chunk in items.chunks(config.batch_size) {
        let texts: Vec<String> = chunk.iter().map(|(_, text)| text.clone()).collect();
        let embedded = embedder
            .embed_batch(&texts)
            .map_err(|e| CliError::stage("embed", e))?;
        vectors.extend(chunk.iter().map(|(id, _)| id.clone()).zip(embedded));
    }

    let mut out = create_output(&args.out)?;
    save_vectors(&mut out, &vectors).map_err(|e| CliError::stage("embed", e))?;
    out.flush().map_err(|e| crate::error::io_input(&args.out, e))?;
    println!(
        "embed: {} vectors of dim {} via {} embedder",
        vectors.len(),
        config.dim,
        config.kind
    );
    Ok(())
}
