//! End-to-end tests against the compiled binary: exit codes, artifact
//! layout, environment-variable precedence, and cross-invocation
//! determinism. Library-level behavior is covered by unit tests; these
//! exercise only what a shell user observes.

mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use common::{
    assert_exit, line_count, psk, read_json, run, stderr_of, stdout_of, write_corpus, write_jsonl,
};
use psk_core::synth::{separable_corpus, synth_sha, SynthConfig};
use tempfile::TempDir;

fn small_config() -> SynthConfig {
    SynthConfig {
        n_cves: 6,
        negatives_per_cve: 24,
        junk_per_negative: 12,
        ..SynthConfig::default()
    }
}

#[test]
fn bare_invocation_and_unknown_flags_exit_two() {
    assert_exit(&run(&mut psk()), 2);
    assert_exit(&run(psk().args(["evaluate", "--no-such-flag"])), 2);
}

#[test]
fn ingest_parses_nvd_feed_and_commit_log() {
    let dir = TempDir::new().unwrap();
    let feed = serde_json::json!({
        "vulnerabilities": [
            {"cve": {
                "id": "CVE-2023-0001",
                "published": "2023-03-01T12:00:00.000",
                "descriptions": [{"lang": "en", "value": "Heap overflow in the parser."}],
                "weaknesses": [{"description": [{"lang": "en", "value": "CWE-787"}]}],
                "references": [{"url": "https://example.invalid/adv/1"}]
            }},
            {"cve": {
                "id": "CVE-2023-0002",
                "published": "2023-04-02T09:30:00.000",
                "descriptions": [{"lang": "en", "value": "Auth bypass on the admin route."}]
            }},
            {"cve": {
                "id": "CVE-2023-0003",
                "published": "2023-05-03T10:00:00.000",
                "descriptions": [{"lang": "fr", "value": "Description sans anglais."}]
            }}
        ]
    });
    let nvd = dir.path().join("feed.json");
    fs::write(&nvd, serde_json::to_string(&feed).unwrap()).unwrap();

    let log_lines = [
        format!(
            r#"{{"repo": "acme/widget", "sha": "{}", "message": "Fix overflow", "diff": "--- a/x\n+++ b/x\n", "committed_at": "2023-02-20T12:00:00Z", "parents": ["{}"]}}"#,
            synth_sha("log-0"),
            synth_sha("parent-0"),
        ),
        format!(
            r#"{{"repo": "acme/widget", "sha": "{}", "message": "Tidy docs", "diff": "--- a/y\n+++ b/y\n", "committed_at": "2023-02-21T12:00:00Z", "parents": []}}"#,
            synth_sha("log-1"),
        ),
        r#"{"sha": "not-a-sha"}"#.to_string(),
    ];
    let log = dir.path().join("log.jsonl");
    fs::write(&log, log_lines.join("\n")).unwrap();

    let out_dir = dir.path().join("ingested");
    let out = run(psk().args([
        "ingest",
        "--nvd",
        nvd.to_str().unwrap(),
        "--commits",
        log.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    assert_exit(&out, 0);
    let stdout = stdout_of(&out);
    assert!(stdout.contains("vulns.jsonl: 2 records (1 skipped)"), "{stdout}");
    assert!(stdout.contains("commits.jsonl: 2 records (1 skipped)"), "{stdout}");

    assert_eq!(line_count(&out_dir.join("vulns.jsonl")), 2);
    assert_eq!(line_count(&out_dir.join("commits.jsonl")), 2);

    let manifest = read_json(&out_dir.join("manifest.json"));
    assert_eq!(manifest["status"], "completed");
    assert_eq!(manifest["command"], "ingest");
    let digest = manifest["inputs"][nvd.to_str().unwrap()].as_str().unwrap();
    assert_eq!(digest.len(), 64);

    let first: serde_json::Value =
        serde_json::from_str(fs::read_to_string(out_dir.join("vulns.jsonl")).unwrap().lines().next().unwrap())
            .unwrap();
    assert_eq!(first["cve_id"], "CVE-2023-0001");
    assert_eq!(first["cwe_ids"][0], "CWE-787");
}

#[test]
fn ingest_from_a_real_git_repository() {
    let dir = TempDir::new().unwrap();
    let repo = dir.path().join("repo");
    fs::create_dir(&repo).unwrap();
    let git = |args: &[&str]| {
        let status = Command::new("git")
            .args(args)
            .current_dir(&repo)
            .env("GIT_AUTHOR_NAME", "Test")
            .env("GIT_AUTHOR_EMAIL", "test@example.invalid")
            .env("GIT_COMMITTER_NAME", "Test")
            .env("GIT_COMMITTER_EMAIL", "test@example.invalid")
            .output()
            .unwrap();
        assert!(status.status.success(), "git {args:?} failed");
    };
    git(&["init", "--quiet"]);
    for i in 0..4 {
        fs::write(repo.join("file.txt"), format!("contents {i}\n")).unwrap();
        git(&["add", "file.txt"]);
        git(&["commit", "--quiet", "-m", &format!("change {i}")]);
    }

    let out_dir = dir.path().join("ingested");
    let out = run(psk().args([
        "ingest",
        "--repo",
        repo.to_str().unwrap(),
        "--max-commits",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    assert_exit(&out, 0);
    assert!(stdout_of(&out).contains("commits.jsonl: 3 records (0 skipped)"));
    assert_eq!(line_count(&out_dir.join("commits.jsonl")), 3);
}

#[test]
fn ingest_missing_input_exits_two_and_names_the_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("no-such-feed.json");
    let out = run(psk().args([
        "ingest",
        "--nvd",
        missing.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]));
    assert_exit(&out, 2);
    assert!(stderr_of(&out).contains("no-such-feed.json"));
}

#[test]
fn stage_chain_from_candidates_to_review() {
    let dir = TempDir::new().unwrap();
    let config = small_config();
    let (vulns, commits, truth) = write_corpus(dir.path(), &config);

    let cand = dir.path().join("cand.jsonl");
    let out = run(psk().args([
        "candidates",
        "--vulns",
        vulns.to_str().unwrap(),
        "--commits",
        commits.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
        "--out",
        cand.to_str().unwrap(),
    ]));
    assert_exit(&out, 0);
    assert_eq!(line_count(&cand), config.n_cves);

    let aug = dir.path().join("aug.jsonl");
    assert_exit(
        &run(psk().args([
            "augment",
            "--commits",
            commits.to_str().unwrap(),
            "--out",
            aug.to_str().unwrap(),
        ])),
        0,
    );
    assert_eq!(line_count(&aug), config.n_cves * (1 + config.negatives_per_cve));

    let vectors = dir.path().join("vec.jsonl");
    assert_exit(
        &run(psk().args([
            "embed",
            "--augmented",
            aug.to_str().unwrap(),
            "--embedder",
            "hash",
            "--dim",
            "256",
            "--out",
            vectors.to_str().unwrap(),
        ])),
        0,
    );
    let query_vectors = dir.path().join("qvec.jsonl");
    assert_exit(
        &run(psk().args([
            "embed",
            "--vulns",
            vulns.to_str().unwrap(),
            "--embedder",
            "hash",
            "--dim",
            "256",
            "--out",
            query_vectors.to_str().unwrap(),
        ])),
        0,
    );

    let preds = dir.path().join("dense.jsonl");
    assert_exit(
        &run(psk().args([
            "retrieve",
            "--candidates",
            cand.to_str().unwrap(),
            "--vectors",
            vectors.to_str().unwrap(),
            "--query-vectors",
            query_vectors.to_str().unwrap(),
            "--k",
            "10",
            "--out",
            preds.to_str().unwrap(),
        ])),
        0,
    );
    assert_eq!(line_count(&preds), config.n_cves);

    let report_path = dir.path().join("report.json");
    let out = run(psk().args([
        "evaluate",
        "--predictions",
        preds.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
        "--k",
        "1,5,10",
        "--json-out",
        report_path.to_str().unwrap(),
    ]));
    assert_exit(&out, 0);
    assert!(stdout_of(&out).contains("mrr:"));

    let report = read_json(&report_path);
    assert_eq!(report["num_queries"], config.n_cves);
    let at_k = report["at_k"].as_array().unwrap();
    assert_eq!(at_k.len(), 3);
    // Content tokens are unique per CVE, so plain cosine over hashed
    // bag-of-words retrieval puts the fixing commit at the top.
    assert!(at_k[0]["recall"].as_f64().unwrap() >= 0.8);
    assert!(at_k[2]["recall"].as_f64().unwrap() >= 0.95);

    let worksheet = dir.path().join("worksheet.jsonl");
    let out = run(psk().args([
        "review",
        "--predictions",
        preds.to_str().unwrap(),
        "--messages",
        aug.to_str().unwrap(),
        "--top",
        "3",
        "--out",
        worksheet.to_str().unwrap(),
    ]));
    assert_exit(&out, 0);
    assert_eq!(line_count(&worksheet), config.n_cves * 3);
    let row: serde_json::Value =
        serde_json::from_str(fs::read_to_string(&worksheet).unwrap().lines().next().unwrap()).unwrap();
    assert!(row["label"].is_null());
    assert!(!row["message_excerpt"].as_str().unwrap().is_empty());

    // Two copies of the same ranking disagree nowhere: both exclusive
    // regions are empty and the shared region holds every solved CVE.
    let other = dir.path().join("lexical.jsonl");
    fs::copy(&preds, &other).unwrap();
    let overlap_path = dir.path().join("overlap.json");
    let out = run(psk().args([
        "compare",
        "--runs",
        &format!("{},{}", preds.to_str().unwrap(), other.to_str().unwrap()),
        "--truth",
        truth.to_str().unwrap(),
        "--json-out",
        overlap_path.to_str().unwrap(),
    ]));
    assert_exit(&out, 0);
    let overlap = read_json(&overlap_path);
    let regions = overlap["regions"].as_object().unwrap();
    assert_eq!(regions.len(), 3);
    assert_eq!(regions["dense"]["count"], 0);
    assert_eq!(regions["lexical"]["count"], 0);
    let shared = regions["dense&lexical"]["count"].as_u64().unwrap() as usize;
    assert!(shared >= 1 && shared <= config.n_cves);
}

#[test]
fn evaluate_rejects_predictions_missing_a_truth_cve() {
    let dir = TempDir::new().unwrap();
    let config = small_config();
    let (vulns, commits, truth) = write_corpus(dir.path(), &config);

    let cand = dir.path().join("cand.jsonl");
    assert_exit(
        &run(psk().args([
            "candidates",
            "--vulns",
            vulns.to_str().unwrap(),
            "--commits",
            commits.to_str().unwrap(),
            "--out",
            cand.to_str().unwrap(),
        ])),
        0,
    );

    // Predictions for zero CVEs cannot cover the truth universe.
    let preds = dir.path().join("empty.jsonl");
    fs::write(&preds, "").unwrap();
    let out = run(psk().args([
        "evaluate",
        "--predictions",
        preds.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
    ]));
    assert_exit(&out, 2);
}

#[test]
fn compare_rejects_duplicate_run_stems() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a").join("run.jsonl");
    let b = dir.path().join("b").join("run.jsonl");
    fs::create_dir_all(a.parent().unwrap()).unwrap();
    fs::create_dir_all(b.parent().unwrap()).unwrap();
    fs::write(&a, "").unwrap();
    fs::write(&b, "").unwrap();
    let truth = dir.path().join("truth.jsonl");
    fs::write(&truth, "").unwrap();

    let out = run(psk().args([
        "compare",
        "--runs",
        &format!("{},{}", a.to_str().unwrap(), b.to_str().unwrap()),
        "--truth",
        truth.to_str().unwrap(),
    ]));
    assert_exit(&out, 2);
    assert!(stderr_of(&out).contains("run.jsonl") || stderr_of(&out).contains("run"));
}

#[test]
fn review_of_empty_predictions_writes_an_empty_worksheet() {
    let dir = TempDir::new().unwrap();
    let preds = dir.path().join("preds.jsonl");
    fs::write(&preds, "").unwrap();
    let worksheet = dir.path().join("worksheet.jsonl");
    let out = run(psk().args([
        "review",
        "--predictions",
        preds.to_str().unwrap(),
        "--out",
        worksheet.to_str().unwrap(),
    ]));
    assert_exit(&out, 0);
    assert_eq!(line_count(&worksheet), 0);

    let out = run(psk().args([
        "review",
        "--predictions",
        preds.to_str().unwrap(),
        "--top",
        "0",
        "--out",
        worksheet.to_str().unwrap(),
    ]));
    assert_exit(&out, 2);
}

#[test]
fn pipeline_writes_every_artifact_and_reruns_byte_identically() {
    let dir = TempDir::new().unwrap();
    let config = small_config();
    let (_, _, truth) = write_corpus(dir.path(), &config);

    let pipeline = |out_dir: &Path| {
        run(psk().args([
            "pipeline",
            "--corpus",
            dir.path().to_str().unwrap(),
            "--truth",
            truth.to_str().unwrap(),
            "--embedder",
            "hash",
            "--dim",
            "128",
            "--seed",
            "7",
            "--k",
            "1,5,10",
            "--out",
            out_dir.to_str().unwrap(),
        ]))
    };

    let out_a = dir.path().join("run-a");
    let first = pipeline(&out_a);
    assert_exit(&first, 0);
    for artifact in [
        "manifest.json",
        "candidates.jsonl",
        "augmented.jsonl",
        "vectors.jsonl",
        "query_vectors.jsonl",
        "predictions.jsonl",
        "report.json",
    ] {
        assert!(out_a.join(artifact).is_file(), "missing {artifact}");
    }
    let manifest = read_json(&out_a.join("manifest.json"));
    assert_eq!(manifest["status"], "completed");
    assert!(manifest["failed_stage"].is_null());

    let report = read_json(&out_a.join("report.json"));
    assert_eq!(report["num_queries"], config.n_cves);

    let out_b = dir.path().join("run-b");
    assert_exit(&pipeline(&out_b), 0);
    for artifact in ["predictions.jsonl", "report.json"] {
        assert_eq!(
            fs::read(out_a.join(artifact)).unwrap(),
            fs::read(out_b.join(artifact)).unwrap(),
            "{artifact} differs between identical invocations"
        );
    }
}

#[test]
fn pipeline_with_training_writes_head_and_splits() {
    let dir = TempDir::new().unwrap();
    let config = SynthConfig {
        n_cves: 10,
        negatives_per_cve: 20,
        junk_per_negative: 12,
        ..SynthConfig::default()
    };
    let (_, _, truth) = write_corpus(dir.path(), &config);

    let out_dir = dir.path().join("run");
    let out = run(psk().args([
        "pipeline",
        "--corpus",
        dir.path().to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
        "--embedder",
        "hash",
        "--dim",
        "64",
        "--train",
        "on",
        "--epochs",
        "1",
        "--d-out",
        "16",
        "--split-ratios",
        "0.6,0.2,0.2",
        "--k",
        "1,5",
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    assert_exit(&out, 0);
    for artifact in ["splits.json", "head.json", "loss.json"] {
        assert!(out_dir.join(artifact).is_file(), "missing {artifact}");
    }
    let manifest = read_json(&out_dir.join("manifest.json"));
    assert_eq!(manifest["status"], "completed");
    assert_eq!(manifest["config"]["head_id"].as_str().unwrap().len(), 12);

    // Defaults evaluate the held-out test split: 2 of the 10 CVEs.
    let report = read_json(&out_dir.join("report.json"));
    assert_eq!(report["num_queries"], 2);
}

#[test]
fn pipeline_stage_failure_exits_three_and_marks_the_manifest() {
    let dir = TempDir::new().unwrap();
    let config = small_config();
    let corpus = separable_corpus(&config);
    write_jsonl(&dir.path().join("vulns.jsonl"), &corpus.vulns);
    write_jsonl(&dir.path().join("commits.jsonl"), &corpus.commits);

    // Every truth sha points at a commit that does not exist, so no CVE has
    // a positive candidate and training cannot build any examples.
    let ghost_truth: Vec<serde_json::Value> = corpus
        .vulns
        .iter()
        .enumerate()
        .map(|(i, v)| {
            serde_json::json!({
                "cve_id": v.cve_id,
                "sha": synth_sha(&format!("ghost-{i}")),
                "confidence": 1.0,
                "is_ground_truth": true,
            })
        })
        .collect();
    let truth = dir.path().join("ghost.jsonl");
    write_jsonl(&truth, &ghost_truth);

    let out_dir = dir.path().join("run");
    let out = run(psk().args([
        "pipeline",
        "--corpus",
        dir.path().to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
        "--embedder",
        "hash",
        "--dim",
        "64",
        "--train",
        "on",
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    assert_exit(&out, 3);
    let manifest = read_json(&out_dir.join("manifest.json"));
    assert_eq!(manifest["status"], "failed");
    assert_eq!(manifest["failed_stage"], "train");
}

#[test]
fn environment_variables_fill_in_missing_flags() {
    let dir = TempDir::new().unwrap();
    let config = SynthConfig {
        n_cves: 2,
        negatives_per_cve: 3,
        junk_per_negative: 8,
        ..SynthConfig::default()
    };
    let (vulns, commits, _) = write_corpus(dir.path(), &config);
    let aug = dir.path().join("aug.jsonl");

    // A malformed PSK_TIMEOUT_SECS fails the run when nothing overrides it.
    let out = run(psk()
        .env("PSK_TIMEOUT_SECS", "soon")
        .args([
            "augment",
            "--commits",
            commits.to_str().unwrap(),
            "--out",
            aug.to_str().unwrap(),
        ]));
    assert_exit(&out, 2);
    assert!(stderr_of(&out).contains("PSK_TIMEOUT_SECS"));

    // The flag takes precedence, so the same broken variable is ignored.
    let out = run(psk()
        .env("PSK_TIMEOUT_SECS", "soon")
        .args([
            "augment",
            "--commits",
            commits.to_str().unwrap(),
            "--timeout-secs",
            "5",
            "--out",
            aug.to_str().unwrap(),
        ]));
    assert_exit(&out, 0);

    // PSK_JOBS of zero is rejected like --jobs 0.
    let out = run(psk()
        .env("PSK_JOBS", "0")
        .args([
            "augment",
            "--commits",
            commits.to_str().unwrap(),
            "--out",
            aug.to_str().unwrap(),
        ]));
    assert_exit(&out, 2);

    // Without an endpoint the external embedder is a configuration error;
    // with PSK_EMBED_ENDPOINT set it gets far enough to fail the stage on
    // the unreachable address.
    let vectors = dir.path().join("vec.jsonl");
    let out = run(psk().args([
        "embed",
        "--vulns",
        vulns.to_str().unwrap(),
        "--embedder",
        "external",
        "--out",
        vectors.to_str().unwrap(),
    ]));
    assert_exit(&out, 2);
    assert!(stderr_of(&out).contains("endpoint"));

    let out = run(psk()
        .env("PSK_EMBED_ENDPOINT", "http://127.0.0.1:9/v1/embeddings")
        .args([
            "embed",
            "--vulns",
            vulns.to_str().unwrap(),
            "--embedder",
            "external",
            "--retry-count",
            "0",
            "--timeout-secs",
            "2",
            "--out",
            vectors.to_str().unwrap(),
        ]));
    assert_exit(&out, 3);
}

#[test]
fn unreachable_generation_endpoint_degrades_to_template_fallback() {
    let dir = TempDir::new().unwrap();
    let config = SynthConfig {
        n_cves: 2,
        negatives_per_cve: 4,
        short_message_fraction: 1.0,
        ..SynthConfig::default()
    };
    let (_, commits, _) = write_corpus(dir.path(), &config);
    let aug = dir.path().join("aug.jsonl");

    let out = run(psk()
        .env("PSK_GEN_ENDPOINT", "http://127.0.0.1:9/v1/generate")
        .args([
            "augment",
            "--commits",
            commits.to_str().unwrap(),
            "--timeout-secs",
            "2",
            "--out",
            aug.to_str().unwrap(),
        ]));
    assert_exit(&out, 0);
    assert_eq!(line_count(&aug), 2 * 5);

    // Every short message was still augmented, through the fallback.
    let mut augmented = 0;
    for line in fs::read_to_string(&aug).unwrap().lines() {
        let row: serde_json::Value = serde_json::from_str(line).unwrap();
        if row["message"]["generated"].is_string() {
            augmented += 1;
            assert_eq!(row["used_fallback"], true);
            assert!(row["message"]["combined"].as_str().unwrap().len()
                > row["message"]["original"].as_str().unwrap().len());
        }
    }
    // All 8 one-word negatives fall under the token threshold; the two
    // fixing commits carry enough words to pass untouched.
    assert_eq!(augmented, 8);
}
