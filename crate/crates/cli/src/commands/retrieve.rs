//! `psk retrieve`: ranks each vulnerability's candidates by cosine over
//! precomputed vectors, optionally through a trained projection head.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use psk_core::corpus::CandidateSet;
use psk_core::embed::EmbeddingVector;
use psk_core::eval::RunPredictions;
use psk_core::index::{index_build, index_search, load_vectors, IndexKind, RankedList};
use psk_core::train::ProjectionHead;

use crate::artifacts::{create_output, open_input, read_candidate_sets};
use crate::error::{io_input, CliError, CliResult};

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    /// Candidate-set JSONL.
    #[arg(long)]
    pub candidates: PathBuf,

    /// Candidate message vectors JSONL, keyed by sha.
    #[arg(long)]
    pub vectors: PathBuf,

    /// Vulnerability description vectors JSONL, keyed by CVE id.
    #[arg(long)]
    pub query_vectors: PathBuf,

    /// Projection head JSON to apply to both sides before ranking.
    #[arg(long)]
    pub head: Option<PathBuf>,

    /// Ranks kept per vulnerability.
    #[arg(long, default_value_t = 100)]
    pub k: usize,

    /// Output predictions JSONL, one ranked list per CVE in id order.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &RetrieveArgs) -> CliResult<()> {
    if args.k == 0 {
        return Err(CliError::input("k must be at least 1"));
    }
    let candidate_sets = read_candidate_sets(&args.candidates)?;
    let doc_vectors = load_vector_map(&args.vectors)?;
    let query_vectors = load_vector_map(&args.query_vectors)?;
    let head = args.head.as_deref().map(load_head).transpose()?;

    let predictions = rank_all(
        &candidate_sets,
        &doc_vectors,
        &query_vectors,
        head.as_ref(),
        args.k,
    )?;

    let mut out = create_output(&args.out)?;
    predictions
        .to_jsonl(&mut out)
        .map_err(|e| CliError::stage("retrieve", e))?;
    out.flush().map_err(|e| io_input(&args.out, e))?;
    println!(
        "retrieve: {} ranked lists, depth {}",
        predictions.by_cve.len(),
        args.k
    );
    Ok(())
}

pub fn load_head(path: &Path) -> CliResult<ProjectionHead> {
    let reader = open_input(path)?;
    ProjectionHead::load(reader).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn load_vector_map(path: &Path) -> CliResult<BTreeMap<String, EmbeddingVector>> {
    let reader = open_input(path)?;
    let pairs =
        load_vectors(reader).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (id, vector) in pairs {
        if map.insert(id.clone(), vector).is_some() {
            return Err(CliError::Input(format!(
                "{}: duplicate vector id {id}",
                path.display()
            )));
        }
    }
    Ok(map)
}

/// Ranks every candidate set against its query vector. CVEs with no
/// candidates yield an empty list so the evaluation universe stays intact.
pub fn rank_all(
    candidate_sets: &[CandidateSet],
    doc_vectors: &BTreeMap<String, EmbeddingVector>,
    query_vectors: &BTreeMap<String, EmbeddingVector>,
    head: Option<&ProjectionHead>,
    k: usize,
) -> CliResult<RunPredictions> {
    let mut predictions = RunPredictions::new("retrieve");
    for set in candidate_sets {
        let ranked = rank_one(set, doc_vectors, query_vectors, head, k)?;
        predictions
            .insert(ranked)
            .map_err(|e| CliError::Input(format!("{}: {e}", set.cve_id)))?;
    }
    Ok(predictions)
}

fn rank_one(
    set: &CandidateSet,
    doc_vectors: &BTreeMap<String, EmbeddingVector>,
    query_vectors: &BTreeMap<String, EmbeddingVector>,
    head: Option<&ProjectionHead>,
    k: usize,
) -> CliResult<RankedList> {
    if set.is_empty() {
        log::warn!("{}: no candidates, emitting an empty ranking", set.cve_id);
        return Ok(RankedList::new(&set.cve_id, Vec::new()));
    }
    let query = query_vectors.get(&set.cve_id).ok_or_else(|| {
        CliError::Input(format!("{}: no query vector", set.cve_id))
    })?;

    let mut pairs = Vec::with_capacity(set.candidate_shas.len());
    for sha in &set.candidate_shas {
        let vector = doc_vectors.get(sha).ok_or_else(|| {
            CliError::Input(format!("{}: candidate {sha} has no vector", set.cve_id))
        })?;
        pairs.push((sha.clone(), vector.clone()));
    }

    let (query, pairs) = match head {
        None => (query.clone(), pairs),
        Some(head) => {
            if head.d_in != query.dim {
                return Err(CliError::Input(format!(
                    "head expects dim {}, query vectors have dim {}",
                    head.d_in, query.dim
                )));
            }
            let projected = pairs
                .into_iter()
                .map(|(sha, v)| (sha, head.project_vec(&v)))
                .collect();
            (head.project_vec(query), projected)
        }
    };

    let index = index_build(&pairs, IndexKind::Flat)
        .map_err(|e| CliError::stage("retrieve", e))?;
    let entries =
        index_search(&index, &query, k).map_err(|e| CliError::stage("retrieve", e))?;
    Ok(RankedList::new(&set.cve_id, entries))
}
