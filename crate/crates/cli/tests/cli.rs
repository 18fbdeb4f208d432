use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_seqcoref"));
    c.env_remove("COREF_DATA_ROOT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(text: &str) -> Value {
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

fn synth(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut args = vec!["synth", "--count", "25", "--seed", "5", "-o", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    ok(&args);
    path
}

fn error_record(out: &Output) -> Value {
    let line = String::from_utf8_lossy(&out.stderr);
    let v: Value = serde_json::from_str(line.trim()).unwrap_or_else(|_| panic!("not one JSON line: {line}"));
    assert!(v["message"].as_str().is_some_and(|m| !m.is_empty()));
    v
}

#[test]
fn full_schemes_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let gold = synth(dir.path(), "gold.jsonl", &[]);
    let distinct = synth(dir.path(), "distinct.jsonl", &["--distinct-boundaries"]);
    for scheme in ["full-token", "full-copy", "full-integer-free", "full-integer-before", "full-antecedent"] {
        // antecedent strings cannot tell apart clusters sharing a mention
        let corpus = if scheme == "full-antecedent" { &distinct } else { &gold };
        let out = ok(&["roundtrip", corpus.to_str().unwrap(), "--scheme", scheme, "--profile", "preco"]);
        let v = json(&out);
        assert_eq!(v["exact"], v["documents"], "{scheme}");
        assert_eq!(v["report"]["conll_avg"].as_f64(), Some(1.0), "{scheme}");
    }
    let out = run(&["roundtrip", gold.to_str().unwrap(), "--scheme", "full-antecedent"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_record(&out)["error"], "data");
}

#[test]
fn scoring_gold_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let gold = synth(dir.path(), "gold.jsonl", &["--vocab", "6"]);
    let v = json(&ok(&["score", "--gold", gold.to_str().unwrap(), "--pred", gold.to_str().unwrap()]));
    for metric in ["muc", "b_cubed", "ceaf_phi4"] {
        assert_eq!(v[metric]["f1"].as_f64(), Some(1.0), "{metric}");
    }
}

#[test]
fn sentence_markers_never_hurt_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let gold = synth(dir.path(), "gold.jsonl", &["--vocab", "5", "--sentence-markers", "--max-len", "60"]);
    let g = gold.to_str().unwrap();
    let plain = json(&ok(&["oracle-align", g, "--profile", "preco"]));
    let marked = json(&ok(&["oracle-align", g, "--profile", "preco", "--sentence-markers"]));
    assert_eq!(marked["sentence_markers"], true);
    assert!(marked["conll_avg"].as_f64() >= plain["conll_avg"].as_f64(), "{marked} vs {plain}");
}

#[test]
fn decode_reads_documents_only() {
    let dir = tempfile::tempdir().unwrap();
    let gold = synth(dir.path(), "gold.jsonl", &["--vocab", "8"]);
    let kept = std::fs::read_to_string(&gold).unwrap();
    let docs_only: String = kept
        .lines()
        .map(|l| {
            let mut v: Value = serde_json::from_str(l).unwrap();
            v["clusters"] = Value::Array(vec![]);
            v.to_string() + "\n"
        })
        .collect();
    let docs = dir.path().join("docs.jsonl");
    std::fs::write(&docs, docs_only).unwrap();
    let seqs = dir.path().join("seqs.jsonl");
    ok(&["encode", gold.to_str().unwrap(), "--scheme", "full-copy", "-o", seqs.to_str().unwrap()]);
    // gold leaves the filesystem before decoding
    std::fs::remove_file(&gold).unwrap();
    let restored = dir.path().join("gold_copy.jsonl");
    std::fs::write(&restored, &kept).unwrap();
    for mode in ["repair", "replay"] {
        let pred = dir.path().join(format!("pred_{mode}.jsonl"));
        ok(&[
            "decode", "--docs", docs.to_str().unwrap(), "--sequences", seqs.to_str().unwrap(), "--scheme", "full-copy",
            "--mode", mode, "-o", pred.to_str().unwrap(),
        ]);
        let v = json(&ok(&["score", "--gold", restored.to_str().unwrap(), "--pred", pred.to_str().unwrap(), "--profile", "preco"]));
        assert_eq!(v["conll_avg"].as_f64(), Some(1.0), "{mode}");
    }
}

#[test]
fn partial_sequences_are_aligned_back() {
    let dir = tempfile::tempdir().unwrap();
    let gold = synth(dir.path(), "gold.jsonl", &[]);
    let seqs = dir.path().join("seqs.jsonl");
    ok(&["encode", gold.to_str().unwrap(), "--scheme", "partial-token", "-o", seqs.to_str().unwrap()]);
    let pred = dir.path().join("pred.jsonl");
    ok(&["align", "--docs", gold.to_str().unwrap(), "--sequences", seqs.to_str().unwrap(), "--scheme", "partial-token", "-o", pred.to_str().unwrap()]);
    let v = json(&ok(&["score", "--gold", gold.to_str().unwrap(), "--pred", pred.to_str().unwrap(), "--profile", "preco"]));
    assert_eq!(v["conll_avg"].as_f64(), Some(1.0));
}

#[test]
fn seeded_runs_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let gold = synth(dir.path(), "gold.jsonl", &["--vocab", "8"]);
    let args = ["decode", "--docs", gold.to_str().unwrap(), "--seed", "3", "--beam", "2", "--jobs", "2"];
    let a = ok(&args);
    assert_eq!(a, ok(&args));
    assert_eq!(a.lines().count(), 25);
    let again = synth(dir.path(), "again.jsonl", &["--vocab", "8"]);
    assert_eq!(std::fs::read(&gold).unwrap(), std::fs::read(again).unwrap());
}

#[test]
fn conll_output_and_segments() {
    let dir = tempfile::tempdir().unwrap();
    let gold = synth(dir.path(), "gold.jsonl", &[]);
    let conll = dir.path().join("gold.conll");
    ok(&["synth", "--count", "25", "--seed", "5", "--format", "conll", "-o", conll.to_str().unwrap()]);
    let v = json(&ok(&["score", "--gold", gold.to_str().unwrap(), "--pred", conll.to_str().unwrap(), "--profile", "preco"]));
    assert_eq!(v["documents"].as_u64(), Some(25));
    let segs = ok(&["segment", gold.to_str().unwrap(), "--max-length", "8", "--overlap", "3"]);
    let first: Value = serde_json::from_str(segs.lines().next().unwrap()).unwrap();
    assert_eq!(first["offset"], 0);
    assert!(first["doc_key"].as_str().unwrap().ends_with("#0"));
}

#[test]
fn data_root_resolves_relative_inputs() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "gold.jsonl", &[]);
    let out = bin()
        .env("COREF_DATA_ROOT", dir.path())
        .args(["score", "--gold", "gold.jsonl", "--pred", "gold.jsonl"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let gold = synth(dir.path(), "gold.jsonl", &[]);
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "scheme = \"partial-token\"\nprofile = \"preco\"\n").unwrap();
    let v = json(&ok(&["roundtrip", gold.to_str().unwrap(), "--config", cfg.to_str().unwrap()]));
    assert_eq!(v["scheme"], "partial-token");
    let v = json(&ok(&["roundtrip", gold.to_str().unwrap(), "--config", cfg.to_str().unwrap(), "--scheme", "full-copy"]));
    assert_eq!(v["scheme"], "full-copy");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let gold = synth(dir.path(), "gold.jsonl", &[]);
    let g = gold.to_str().unwrap();

    let out = run(&["roundtrip", g, "--scheme", "full-copy", "--sentence-markers"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["error"], "usage");

    let out = run(&["encode", g, "--scheme", "partial-copy"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["score", "--nonsense"]);
    assert_eq!(out.status.code(), Some(2));
    error_record(&out);

    let out = run(&["score", "--gold", g, "--pred", dir.path().join("missing.jsonl").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_record(&out)["error"], "data");

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"doc_key\": \"d\", \"sentences\": [[\"a\"]], \"clusters\": [[[0, 4]]]}\n").unwrap();
    let out = run(&["encode", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    assert!(run(&["--help"]).status.success());
}
