//! Fixture builders shared by the criterion benchmarks. Sizes follow the
//! working scale of the retrieval engine: hundreds of candidate commits per
//! query and four-digit vector collections.

use std::collections::BTreeMap;

use psk_core::embed::EmbeddingVector;
use psk_core::synth::{random_unit_vectors, separable_corpus, SynthConfig};
use psk_core::textprep::{tokenize, TokenStream};
use psk_core::train::TrainingExample;

/// Tokenized commit messages keyed by sha, plus the tokenized descriptions
/// that query them.
pub fn lexical_fixture(n_cves: usize, negatives_per_cve: usize) -> (BTreeMap<String, TokenStream>, Vec<TokenStream>) {
    let corpus = separable_corpus(&SynthConfig {
        n_cves,
        negatives_per_cve,
        ..SynthConfig::default()
    });
    let docs = corpus
        .commits
        .iter()
        .map(|c| (c.sha.clone(), tokenize(&c.message)))
        .collect();
    let queries = corpus.vulns.iter().map(|v| tokenize(&v.description)).collect();
    (docs, queries)
}

/// `n` labeled unit vectors of the given dimension, seeded.
pub fn vector_fixture(seed: u64, n: usize, dim: usize) -> Vec<(String, EmbeddingVector)> {
    random_unit_vectors(seed, n, dim)
        .into_iter()
        .enumerate()
        .map(|(i, v)| (format!("doc-{i:05}"), EmbeddingVector::new(v)))
        .collect()
}

/// One contrastive example with the given number of hard negatives.
pub fn example_fixture(dim: usize, negatives: usize) -> TrainingExample {
    let mut vectors = random_unit_vectors(11, negatives + 2, dim).into_iter();
    let query_vec = EmbeddingVector::new(vectors.next().unwrap());
    let positive_vec = EmbeddingVector::new(vectors.next().unwrap());
    let hard_negative_vecs: Vec<EmbeddingVector> = vectors.map(EmbeddingVector::new).collect();
    TrainingExample {
        cve_id: "CVE-2015-1000".into(),
        query_vec,
        positive_id: "positive".into(),
        positive_vec,
        hard_negative_ids: (0..negatives).map(|i| format!("negative-{i}")).collect(),
        hard_negative_vecs,
    }
}

/// A paragraph-sized message for embedding throughput runs.
pub fn long_message(words: usize) -> String {
    (0..words)
        .map(|i| format!("token{i:04}"))
        .collect::<Vec<_>>()
        .join(" ")
}
