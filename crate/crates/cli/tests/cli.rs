use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_cxnprobe")
}

fn cxnprobe(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env_remove("CXNPROBE_CACHE_DIR")
        .env_remove("CXNPROBE_LLM_API_KEY")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn eval_all(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["eval", "all", "--seed", "7", "--output", s(out)];
    args.extend_from_slice(extra);
    let o = cxnprobe(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    o
}

fn adapter_spec() -> String {
    format!("spawn:{} mock-adapter --seed 7", bin())
}

#[test]
fn manifest_records_config_model_datasets_and_outputs() {
    let dir = TempDir::new().unwrap();
    eval_all(dir.path(), &[]);
    let m = manifest(dir.path());
    assert_eq!(m["status"], "ok");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(m["model"]["model_name"], "mock-s7");
    assert_eq!(m["model"]["vocab_size"], 64);
    for kind in ["cec", "multithat", "magpie", "cogs", "npn"] {
        let d = &m["datasets"][kind];
        assert!(
            d["source"].as_str().unwrap().starts_with("builtin:"),
            "{kind}"
        );
        assert_eq!(d["sha256"].as_str().unwrap().len(), 64, "{kind}");
    }
    for name in ["scores.jsonl", "table.tsv"] {
        let hash = m["outputs"][name].as_str().unwrap();
        let bytes = std::fs::read(dir.path().join(name)).unwrap();
        use sha2::Digest;
        let want: String = sha2::Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        assert_eq!(hash, want, "{name}");
    }
}

#[test]
fn table_regenerates_from_manifest_alone() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    eval_all(a.path(), &["--nucleus-q", "0.9", "--format", "tsv"]);
    let man = a.path().join("manifest.json");
    let o = cxnprobe(&["--config", s(&man), "--output", s(b.path()), "eval", "all"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(a.path(), "table.tsv"), read(b.path(), "table.tsv"));
    assert_eq!(
        read(a.path(), "scores.jsonl"),
        read(b.path(), "scores.jsonl")
    );
    assert_eq!(manifest(b.path())["config"]["nucleus_q"], 0.9);
}

#[test]
fn warm_cache_makes_zero_distribution_calls() {
    let cache = TempDir::new().unwrap();
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    eval_all(a.path(), &["--cache-dir", s(cache.path())]);
    eval_all(b.path(), &["--cache-dir", s(cache.path())]);
    let cold = manifest(a.path())["details"]["distribution_calls"]
        .as_u64()
        .unwrap();
    let warm = manifest(b.path())["details"]["distribution_calls"]
        .as_u64()
        .unwrap();
    assert!(cold > 0);
    assert_eq!(warm, 0);
    assert_eq!(
        read(a.path(), "scores.jsonl"),
        read(b.path(), "scores.jsonl")
    );
}

#[test]
fn cache_dir_comes_from_the_environment() {
    let cache = TempDir::new().unwrap();
    let out = TempDir::new().unwrap();
    let o = Command::new(bin())
        .args(["eval", "cec", "--output", s(out.path())])
        .env("CXNPROBE_CACHE_DIR", cache.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(cache.path().join("mock-s0.cache.jsonl").exists());
}

#[test]
fn spawned_adapter_matches_in_process_mock() {
    let (a, b, c) = (
        TempDir::new().unwrap(),
        TempDir::new().unwrap(),
        TempDir::new().unwrap(),
    );
    eval_all(a.path(), &[]);
    let spec = adapter_spec();
    eval_all(b.path(), &["--gateway", &spec]);
    eval_all(c.path(), &["--gateway", &spec, "--parallel", "4"]);
    let want = read(a.path(), "scores.jsonl");
    assert_eq!(read(b.path(), "scores.jsonl"), want);
    assert_eq!(read(c.path(), "scores.jsonl"), want);
}

#[test]
fn flags_override_file_over_defaults() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 3\nnucleus_q = 0.8\n").unwrap();
    let out = dir.path().join("out");
    let o = cxnprobe(&[
        "--config",
        s(&cfg),
        "--seed",
        "5",
        "--output",
        s(&out),
        "eval",
        "cec",
    ]);
    assert!(o.status.success());
    let m = manifest(&out);
    assert_eq!(m["seed"], 5);
    assert_eq!(m["config"]["nucleus_q"], 0.8);
    assert_eq!(m["config"]["threshold"], 0.9);
}

#[test]
fn config_errors_exit_1() {
    let dir = TempDir::new().unwrap();
    let o = cxnprobe(&[
        "--nucleus-q",
        "1.5",
        "--output",
        s(dir.path()),
        "eval",
        "cc",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"no_such_key": 1}"#).unwrap();
    let o = cxnprobe(&[
        "--config",
        s(&cfg),
        "--output",
        s(dir.path()),
        "eval",
        "cec",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = cxnprobe(&["--the-pooling", "bogus", "eval", "cogs"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(cxnprobe(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_llm_key_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let nouns = dir.path().join("nouns.txt");
    std::fs::write(&nouns, "day\n").unwrap();
    let o = cxnprobe(&[
        "--output",
        s(dir.path()),
        "npn",
        "generate",
        "--nouns",
        s(&nouns),
        "--preps",
        "by",
        "--endpoint",
        "http://127.0.0.1:9/v1/chat/completions",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn gateway_errors_exit_2_with_manifest() {
    let dir = TempDir::new().unwrap();
    let o = cxnprobe(&[
        "--gateway",
        "spawn:/nonexistent/adapter",
        "--output",
        s(dir.path()),
        "eval",
        "cec",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(manifest(dir.path())["status"], "failed");
}

#[test]
fn dataset_errors_exit_3_after_flushing_partial_scores() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.jsonl");
    let out = dir.path().join("out");
    let o = cxnprobe(&[
        "--multithat",
        s(&missing),
        "--output",
        s(&out),
        "eval",
        "all",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let scores = read(&out, "scores.jsonl");
    assert_eq!(scores.lines().count(), 1);
    assert!(scores.contains("\"cec_auc\""));
    let m = manifest(&out);
    assert_eq!(m["status"], "failed");
    assert!(m["error"].as_str().unwrap().contains("missing.jsonl"));
}

#[test]
fn report_assemble_builds_a_12_by_13_table() {
    let root = TempDir::new().unwrap();
    let mut files: Vec<PathBuf> = Vec::new();
    for seed in 1..=12 {
        let out = root.path().join(format!("m{seed}"));
        let o = cxnprobe(&[
            "eval",
            "all",
            "--seed",
            &seed.to_string(),
            "--output",
            s(&out),
        ]);
        assert!(o.status.success());
        files.push(out.join("scores.jsonl"));
    }
    let out = root.path().join("report");
    let mut args = vec!["--output", s(&out), "report", "assemble", "--scores"];
    args.extend(files.iter().map(|f| s(f)));
    let o = cxnprobe(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = read(&out, "table.tsv");
    let rows: Vec<Vec<&str>> = table.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 13);
    assert!(rows.iter().all(|r| r.len() == 14));
    assert_eq!(rows[0][1..], cxnprobe::evals::TABLE_COLUMNS);
    // every cell carries used/skipped counts
    assert!(rows[1..]
        .iter()
        .flatten()
        .skip(1)
        .all(|c| c.starts_with("mock-") || c.ends_with(']')));
    assert_eq!(manifest(&out)["inputs"].as_object().unwrap().len(), 12);
}

#[test]
fn report_correlate_uses_bundled_tables() {
    let dir = TempDir::new().unwrap();
    let o = cxnprobe(&["--output", s(dir.path()), "report", "correlate"]);
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.starts_with("mean r = 0.7750"), "{stdout}");
    let corr: Value = serde_json::from_str(&read(dir.path(), "correlation.json")).unwrap();
    assert_eq!(corr["models"].as_array().unwrap().len(), 8);
    assert_eq!(corr["per_column"].as_array().unwrap().len(), 13);
}

#[test]
fn corpus_count_over_a_file() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("c.txt");
    std::fs::write(
        &corpus,
        "I can't swim, let alone dive.\nLet alone that. let\nalone\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = cxnprobe(&[
        "--output",
        s(&out),
        "corpus",
        "count",
        "--corpus",
        s(&corpus),
        "--query",
        "let alone",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(&out, "counts.tsv"), "let alone\t2\n");
}

#[test]
fn probe_prints_affinities() {
    let dir = TempDir::new().unwrap();
    let o = cxnprobe(&[
        "--output",
        s(dir.path()),
        "probe",
        "local",
        "--text",
        "let alone the road",
        "--i",
        "let",
        "--j",
        "alone",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let a = v["result"]["value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&a), "{v}");
    let o = cxnprobe(&[
        "--output",
        s(dir.path()),
        "probe",
        "global",
        "--text",
        "let alone",
        "--word",
        "9",
    ]);
    assert_eq!(o.status.code(), Some(1));
}
