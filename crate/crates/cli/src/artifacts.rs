//! Typed readers and writers for the JSONL artifacts the stages exchange,
//! plus input digests for the run manifest.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use psk_core::corpus::{CandidateSet, CommitRecord, DatasetSplit, LinkedPair, VulnRecord};
use psk_core::textprep::{AugmentedMessage, CommitAugment};

use crate::error::{io_input, CliError, CliResult};

pub fn open_input(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| io_input(path, e))
}

pub fn create_output(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| io_input(parent, e))?;
        }
    }
    File::create(path).map(BufWriter::new).map_err(|e| io_input(path, e))
}

/// Reads one serde value per non-blank line. Errors name the path and the
/// 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let reader = open_input(path)?;
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_input(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: T = serde_json::from_str(&line).map_err(|e| {
            CliError::Input(format!("{} line {}: {e}", path.display(), n + 1))
        })?;
        out.push(value);
    }
    Ok(out)
}

/// Writes one JSON object per line in the given order.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> CliResult<()> {
    let mut out = create_output(path)?;
    for item in items {
        serde_json::to_writer(&mut out, item)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        out.write_all(b"\n").map_err(|e| io_input(path, e))?;
    }
    out.flush().map_err(|e| io_input(path, e))
}

pub fn read_vulns(path: &Path) -> CliResult<Vec<VulnRecord>> {
    let records: Vec<VulnRecord> = read_jsonl(path)?;
    for r in &records {
        r.validate()
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    Ok(records)
}

pub fn read_commits(path: &Path) -> CliResult<Vec<CommitRecord>> {
    let records: Vec<CommitRecord> = read_jsonl(path)?;
    for r in &records {
        r.validate()
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    Ok(records)
}

pub fn read_candidate_sets(path: &Path) -> CliResult<Vec<CandidateSet>> {
    read_jsonl(path)
}

pub fn read_truth_pairs(path: &Path) -> CliResult<Vec<LinkedPair>> {
    let pairs: Vec<LinkedPair> = read_jsonl(path)?;
    for p in &pairs {
        p.validate()
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    Ok(pairs)
}

/// Augmentation outcomes keyed by sha, the shape the dense stages consume.
pub fn read_messages(path: &Path) -> CliResult<BTreeMap<String, AugmentedMessage>> {
    let outcomes: Vec<CommitAugment> = read_jsonl(path)?;
    let mut map = BTreeMap::new();
    for o in outcomes {
        if map.insert(o.sha.clone(), o.message).is_some() {
            return Err(CliError::Input(format!(
                "{}: duplicate sha {}",
                path.display(),
                o.sha
            )));
        }
    }
    Ok(map)
}

pub fn read_splits(path: &Path) -> CliResult<Vec<DatasetSplit>> {
    let reader = open_input(path)?;
    serde_json::from_reader(reader)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// SHA-256 of a file's bytes as lowercase hex.
pub fn file_digest(path: &Path) -> CliResult<String> {
    let mut reader = open_input(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = reader.read(&mut buf).map_err(|e| io_input(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    Ok(out)
}
