//! Helpers shared by the binary-level test targets: spawning the compiled
//! binary with a scrubbed environment, serializing synthetic corpora, and
//! reading artifacts back.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use psk_core::synth::{separable_corpus, SynthConfig};

/// Command for the binary under test with all PSK_* variables scrubbed so
/// the ambient environment never leaks into a test.
pub fn psk() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_psk"));
    for var in [
        "PSK_EMBED_ENDPOINT",
        "PSK_GEN_ENDPOINT",
        "PSK_TIMEOUT_SECS",
        "PSK_JOBS",
    ] {
        cmd.env_remove(var);
    }
    cmd
}

pub fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary should spawn")
}

pub fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

pub fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn line_count(path: &Path) -> usize {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .count()
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Serializes a synthetic corpus to vulns.jsonl, commits.jsonl, and
/// truth.jsonl under `dir`.
pub fn write_corpus(dir: &Path, config: &SynthConfig) -> (PathBuf, PathBuf, PathBuf) {
    let corpus = separable_corpus(config);
    let vulns = dir.join("vulns.jsonl");
    let commits = dir.join("commits.jsonl");
    let truth = dir.join("truth.jsonl");
    write_jsonl(&vulns, &corpus.vulns);
    write_jsonl(&commits, &corpus.commits);
    write_jsonl(&truth, &corpus.truth);
    (vulns, commits, truth)
}

pub fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) {
    let mut buf = String::new();
    for item in items {
        buf.push_str(&serde_json::to_string(item).unwrap());
        buf.push('\n');
    }
    fs::write(path, buf).unwrap();
}
