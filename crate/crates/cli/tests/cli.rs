use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn ncb(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncb"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = ncb(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Last stderr line parsed as the error payload.
fn error_payload(out: &Output) -> Value {
    let err = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(err.lines().last().unwrap()).unwrap()
}

fn digest(path: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

fn small_data(dir: &Path, extra: &[&str]) {
    let mut args = vec!["gen-data", "--out", "scenes.enc", "--count", "300", "--seed", "2", "--block-dim", "16"];
    args.extend_from_slice(extra);
    ok(dir, &args);
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["--help"][..], &["--version"], &["fit", "--help"], &["inspect", "--help"]] {
        let out = ncb(dir.path(), args);
        assert_eq!(out.status.code(), Some(0), "{args:?}");
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn bad_flags_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = ncb(dir.path(), &["fit", "--bogus"]);
    assert_eq!(out.status.code(), Some(3));
    let e = error_payload(&out);
    assert_eq!(e["error"]["class"], "validation");
    assert_eq!(e["error"]["exit_code"], 3);
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = ncb(dir.path(), &["fit", "--encodings", "absent.enc", "--out", "c.json"]);
    assert_eq!(out.status.code(), Some(2));
    let e = error_payload(&out);
    assert_eq!(e["error"]["class"], "io");
    assert!(e["error"]["message"].as_str().unwrap().contains("absent.enc"));
}

#[test]
fn malformed_corpus_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path(), &[]);
    std::fs::write(dir.path().join("c.json"), "{\"format\": \"something else\"}").unwrap();
    let out = ncb(dir.path(), &["infer", "--corpus", "c.json", "--encodings", "scenes.enc", "--out", "x.jsonl"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("x.jsonl").exists());
}

/// Parses the `fit` table into (factor, N_C) rows.
fn concept_counts(table: &str) -> Vec<(String, usize)> {
    table
        .lines()
        .skip(1)
        .take_while(|l| !l.starts_with("average"))
        .map(|l| {
            let cols: Vec<&str> = l.split('\t').collect();
            (cols[1].to_owned(), cols[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn fit_on_clean_data_recovers_every_value() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path(), &["--spread", "0"]);
    let out = ok(dir.path(), &["fit", "--encodings", "scenes.enc", "--encoder", "encoder.json", "--out", "c.json"]);
    let rows = concept_counts(&out);
    assert_eq!(rows.len(), 8);
    assert!(out.contains("average"));
    let nc = |f: &str| rows.iter().find(|(name, _)| name == f).unwrap().1;
    assert!(nc("shape") >= 3, "{out}");
    assert!(nc("color") >= 8, "{out}");
}

#[test]
fn kmeans_fit_makes_k_concepts_per_block() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path(), &[]);
    let out = ok(
        dir.path(),
        &["fit", "--encodings", "scenes.enc", "--out", "c.json", "--cluster", "kmeans", "--k", "4", "--seed", "1"],
    );
    assert!(concept_counts(&out).iter().all(|(_, n)| *n == 4), "{out}");
    let out = ncb(dir.path(), &["fit", "--encodings", "scenes.enc", "--out", "c.json", "--cluster", "kmeans"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn infer_writes_a_header_and_one_line_per_scene() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path(), &[]);
    ok(dir.path(), &["fit", "--encodings", "scenes.enc", "--out", "c.json"]);
    ok(dir.path(), &["infer", "--corpus", "c.json", "--encodings", "scenes.enc", "--out", "k.jsonl", "--top-k", "3"]);
    let text = std::fs::read_to_string(dir.path().join("k.jsonl")).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 301);
    assert_eq!(lines[0]["format"], "ncb-concepts");
    assert_eq!(lines[0]["schema_version"], 1);
    assert_eq!(lines[5]["scene"], 4);
    let slot = &lines[5]["slots"][0];
    assert_eq!(slot["concepts"].as_array().unwrap().len(), 8);
    assert_eq!(slot["probabilities"].as_array().unwrap().len(), 8);
}

#[test]
fn inspect_answers_all_four_queries() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path(), &[]);
    ok(dir.path(), &["fit", "--encodings", "scenes.enc", "--out", "c.json"]);
    let blocks = ok(dir.path(), &["inspect", "--corpus", "c.json", "blocks"]);
    assert!(blocks.starts_with("block\tfactor\tN_C"));
    let card = ok(
        dir.path(),
        &["inspect", "--corpus", "c.json", "card", "--encodings", "scenes.enc", "--block", "5", "--concept", "1"],
    );
    assert!(card.contains("color:"), "{card}");
    let cmp = ok(
        dir.path(),
        &["inspect", "--corpus", "c.json", "compare", "--encodings", "scenes.enc", "--block", "5", "--a", "1", "--b", "2"],
    );
    assert!(cmp.contains("prototype distance"));
    let sim: Value = serde_json::from_str(&ok(
        dir.path(),
        &["inspect", "--corpus", "c.json", "--json", "similar", "--block", "5", "--concept", "1"],
    ))
    .unwrap();
    assert_eq!(sim["anchor"], 1);
    let swap = ok(
        dir.path(),
        &[
            "inspect", "--corpus", "c.json", "swap", "--encodings", "scenes.enc", "--encoder", "encoder.json",
            "--scene", "0", "--slot", "0", "--block", "0", "--target", "1",
        ],
    );
    assert!(swap.contains("no visible effect"), "{swap}");
    let out = ncb(dir.path(), &["inspect", "--corpus", "c.json", "similar", "--block", "5", "--concept", "99"]);
    assert_eq!(out.status.code(), Some(4));
}

fn feedback(actions: &str) -> String {
    format!("{{\"format\":\"ncb-feedback\",\"schema_version\":1,\"actor\":\"t\",\"actions\":[{actions}]}}")
}

#[test]
fn contradictory_feedback_leaves_the_corpus_untouched() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path(), &[]);
    ok(dir.path(), &["fit", "--encodings", "scenes.enc", "--out", "c.json"]);
    let before = digest(&dir.path().join("c.json"));
    // The second merge needs concept 2, which the first one just removed.
    let doc = feedback(
        r#"{"op":"merge","block":5,"from":2,"into":3},{"op":"merge","block":5,"from":2,"into":4}"#,
    );
    std::fs::write(dir.path().join("fb.json"), doc).unwrap();
    let out = ncb(dir.path(), &["revise", "--corpus", "c.json", "--feedback", "fb.json", "--log", "log.jsonl"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_payload(&out)["error"]["class"], "domain");
    assert_eq!(digest(&dir.path().join("c.json")), before);
    assert!(!dir.path().join("log.jsonl").exists());

    std::fs::write(dir.path().join("bad.json"), "{\"format\":\"ncb-feedback\"}").unwrap();
    let out = ncb(dir.path(), &["revise", "--corpus", "c.json", "--feedback", "bad.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(digest(&dir.path().join("c.json")), before);
}

#[test]
fn revisions_append_to_the_log() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path(), &[]);
    ok(dir.path(), &["fit", "--encodings", "scenes.enc", "--out", "c.json"]);
    std::fs::write(dir.path().join("a.json"), feedback(r#"{"op":"merge","block":5,"from":2,"into":3}"#)).unwrap();
    std::fs::write(dir.path().join("b.json"), feedback(r#"{"op":"zero_concept","block":2,"concept":1}"#)).unwrap();
    ok(dir.path(), &["revise", "--corpus", "c.json", "--feedback", "a.json", "--log", "log.jsonl"]);
    ok(dir.path(), &["revise", "--corpus", "c.json", "--feedback", "b.json", "--log", "log.jsonl"]);
    let log = std::fs::read_to_string(dir.path().join("log.jsonl")).unwrap();
    let entries: Vec<Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(entries.len(), 2);
    assert_eq!(entries[1]["version_before"], 1);
    assert_eq!(entries[1]["version_after"], 2);
    assert_eq!(entries[0]["timestamp"], "unstamped");
    let corpus: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("c.json")).unwrap()).unwrap();
    assert_eq!(corpus["version"], 2);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let hashes = || {
        let dir = tempfile::tempdir().unwrap();
        small_data(dir.path(), &["--dup", "2"]);
        ok(dir.path(), &["fit", "--encodings", "scenes.enc", "--out", "c.json"]);
        ok(dir.path(), &["infer", "--corpus", "c.json", "--encodings", "scenes.enc", "--out", "k.jsonl"]);
        ["scenes.enc", "scenes.enc.labels", "encoder.json", "c.json", "k.jsonl"].map(|f| digest(&dir.path().join(f)))
    };
    assert_eq!(hashes(), hashes());
}

#[test]
fn ground_truth_sudoku_script_solves_everything() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["sudoku-gen", "--variant", "full", "--count", "10", "--seed", "4", "--out", "sd"]);
    assert!(dir.path().join("sd/encoder.json").exists());
    let table = ok(dir.path(), &["sudoku-eval", "--dataset", "sd", "--seeds", "2", "--out", "r.json"]);
    assert_eq!(table.lines().count(), 4, "{table}");
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r["solved_mean"] == 100.0));
}

#[test]
fn corpus_sudoku_eval_uses_the_dataset_encoder() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["sudoku-gen", "--count", "4", "--seed", "4", "--out", "sd", "--k", "10", "--n", "3"]);
    ok(
        dir.path(),
        &["gen-data", "--encoder", "sd/encoder.json", "--out", "fit.enc", "--encoder-out", "e.json", "--count", "400"],
    );
    assert_eq!(digest(&dir.path().join("e.json")), digest(&dir.path().join("sd/encoder.json")));
    ok(dir.path(), &["fit", "--encodings", "fit.enc", "--out", "c.json"]);
    let table = ok(
        dir.path(),
        &["sudoku-eval", "--dataset", "sd", "--concepts", "corpus", "--corpus", "c.json", "--seeds", "1", "--k", "10", "--n", "3"],
    );
    assert!(table.contains("ncb"), "{table}");
    let out = ncb(dir.path(), &["sudoku-eval", "--dataset", "sd", "--concepts", "corpus"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn eval_q1_writes_a_versioned_report() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path(), &[]);
    ok(dir.path(), &["fit", "--encodings", "scenes.enc", "--out", "c.json"]);
    let table = ok(
        dir.path(),
        &["eval-q1", "--corpus", "c.json", "--encodings", "scenes.enc", "--sizes", "100,20", "--n-test", "100", "--out", "q1.json"],
    );
    assert!(table.starts_with("n_train\tmean\tstd"));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("q1.json")).unwrap()).unwrap();
    assert_eq!(report["format"], "ncb-q1-report");
    assert_eq!(report["rows"].as_array().unwrap().len(), 2);
    assert_eq!(report["rows"][0]["runs"].as_array().unwrap().len(), 3);
    // Asking for more objects than exist is a domain error.
    let out = ncb(dir.path(), &["eval-q1", "--corpus", "c.json", "--encodings", "scenes.enc", "--sizes", "2000"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn workspace_manifest_validates_its_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("ws")).unwrap();
    small_data(dir.path(), &[]);
    ok(dir.path(), &["fit", "--encodings", "scenes.enc", "--out", "ws/c.json"]);
    ok(
        dir.path(),
        &[
            "workspace", "init", "--out", "ws/workspace.json", "--encoder", "encoder.json", "--encodings", "scenes.enc",
            "--corpus", "ws/c.json", "--log", "ws/log.jsonl",
        ],
    );
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ws/workspace.json")).unwrap()).unwrap();
    assert_eq!(manifest["format"], "ncb-workspace");
    assert_eq!(manifest["corpora"][0], "c.json");
    let out = ok(dir.path(), &["workspace", "check", "ws/workspace.json"]);
    assert!(out.contains("300 scenes"), "{out}");

    std::fs::remove_file(dir.path().join("ws/c.json")).unwrap();
    let out = ncb(dir.path(), &["workspace", "check", "ws/workspace.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn serve_answers_over_http() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path(), &[]);
    ok(dir.path(), &["fit", "--encodings", "scenes.enc", "--out", "c.json"]);
    let mut child = Command::new(env!("CARGO_BIN_EXE_ncb"))
        .current_dir(dir.path())
        .args(["serve", "--corpus", "c.json", "--encodings", "scenes.enc", "--port", "0"])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line
        .trim()
        .strip_prefix("listening on http://")
        .and_then(|s| s.strip_suffix("/v1"))
        .unwrap_or_else(|| panic!("unexpected banner {line:?}"))
        .to_owned();

    let mut stream = TcpStream::connect(&addr).unwrap();
    write!(stream, "GET /v1/version HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();

    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    let body = response.split("\r\n\r\n").nth(1).unwrap();
    let v: Value = serde_json::from_str(body).unwrap();
    assert_eq!(v["api_version"], "v1");
    assert_eq!(v["scenes"], 300);
}
