use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SUBCOMMANDS: [&str; 9] = [
    "build-graph",
    "sort",
    "retrieve",
    "select",
    "train",
    "predict",
    "evaluate",
    "synth",
    "ablate",
];

fn evigraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evigraph"))
        .args(args)
        .env_remove("EVIGRAPH_CONFIG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn core_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, n: &str, dev: &str) {
    stdout(&evigraph(&["synth", "--n", n, "--dev", dev, "--seed", "7", "--out", s(dir)]));
}

#[test]
fn help_exits_zero() {
    assert_eq!(evigraph(&["--help"]).status.code(), Some(0));
    for sub in SUBCOMMANDS {
        let o = evigraph(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        assert!(String::from_utf8_lossy(&o.stdout).contains("Usage"));
    }
}

#[test]
fn usage_errors_exit_two() {
    let o = evigraph(&["evaluate", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert_eq!(evigraph(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(evigraph(&["build-graph"]).status.code(), Some(2));
}

#[test]
fn missing_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.jsonl");
    fs::write(&p, "").unwrap();
    let o = evigraph(&["evaluate", "--preds", s(&p), "--gold", "missing.jsonl"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("file not found"));
    assert!(o.stdout.is_empty());
}

#[test]
fn bad_config_exits_one() {
    let o = evigraph(&["--set", "node_dim=0", "synth", "--n", "3", "--dev", "0", "--out", "/nonexistent"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("node_dim"));
    let o = evigraph(&["--preset", "huge", "build-graph", "--input", "x"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn build_graph_matches_golden() {
    let out = stdout(&evigraph(&["build-graph", "--input", s(&core_fixture("riots.json"))]));
    let got: serde_json::Value = serde_json::from_str(&out).unwrap();
    let want: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(core_fixture("riots.graph.json")).unwrap()).unwrap();
    assert_eq!(got, want);
    let claim = stdout(&evigraph(&[
        "build-graph",
        "--input",
        s(&core_fixture("riots.json")),
        "--origin",
        "claim",
    ]));
    assert!(claim.contains("\"origin\": \"claim\""));
}

#[test]
fn sort_prints_order() {
    let out = stdout(&evigraph(&["sort", "--input", s(&core_fixture("riots.json"))]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["sentence_order"], serde_json::json!(["s1", "s2"]));
    assert_eq!(v["node_order"].as_array().unwrap().len(), 13);
}

#[test]
fn synth_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    synth(a.path(), "300", "60");
    synth(b.path(), "300", "60");
    for f in ["corpus.jsonl", "train.jsonl", "dev.jsonl", "srl.jsonl"] {
        let (x, y) = (fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        assert!(!x.is_empty());
        assert_eq!(x, y, "{f}");
    }
    let frozen = fs::read(core_fixture("synth/srl.jsonl")).unwrap();
    let c = tempfile::tempdir().unwrap();
    synth(c.path(), "6", "3");
    assert_eq!(fs::read(c.path().join("srl.jsonl")).unwrap(), frozen);
}

#[test]
fn retrieve_and_select() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "6", "3");
    let corpus = dir.path().join("corpus.jsonl");
    let dataset = dir.path().join("train.jsonl");
    let out = stdout(&evigraph(&["--set", "top_docs=3", "retrieve", "--corpus", s(&corpus), "--dataset", s(&dataset)]));
    let lines: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 6);
    for l in &lines {
        assert_eq!(l["documents"].as_array().unwrap().len(), 3);
    }
    let ids: Vec<&str> = lines.iter().map(|l| l["instance_id"].as_str().unwrap()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);

    let out = stdout(&evigraph(&["select", "--corpus", s(&corpus), "--claim", "Genolos occurred in Siver ."]));
    let ranked: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(ranked[0]["doc_id"], "Genolos");
    assert_eq!(ranked.as_array().unwrap().len(), 5);
    let o = evigraph(&["select", "--corpus", s(&corpus), "--claim", "x", "--trained"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn train_predict_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "12", "6");
    let cfg = d.join("cfg.txt");
    fs::write(&cfg, "stage1_epochs = 2\nstage2_epochs = 2\n").unwrap();
    let ck = d.join("ck.json");
    let ck2 = d.join("ck2.json");
    let train_args = |out: &Path| {
        vec![
            "--preset".to_string(),
            "desk".into(),
            "--config".into(),
            s(&cfg).into(),
            "--seed".into(),
            "3".into(),
            "train".into(),
            "--dataset".into(),
            s(&d.join("train.jsonl")).into(),
            "--srl".into(),
            s(&d.join("srl.jsonl")).into(),
            "--out".into(),
            s(out).into(),
        ]
    };
    let a: Vec<String> = train_args(&ck);
    let summary = stdout(&evigraph(&a.iter().map(String::as_str).collect::<Vec<_>>()));
    let v: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(v["seed"], 3);
    assert_eq!(v["training_log"]["epochs"].as_array().unwrap().len(), 4);
    let b: Vec<String> = train_args(&ck2);
    let mut b: Vec<&str> = b.iter().map(String::as_str).collect();
    b.insert(0, "4");
    b.insert(0, "--jobs");
    stdout(&evigraph(&b));
    let without_jobs = |p: &Path| {
        let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap();
        v["config"].as_object_mut().unwrap().remove("jobs").unwrap();
        v
    };
    assert_eq!(without_jobs(&ck), without_jobs(&ck2));

    let preds = d.join("p.jsonl");
    stdout(&evigraph(&["predict", "--checkpoint", s(&ck), "--srl", s(&d.join("srl.jsonl")), "--out", s(&preds)]));
    let on_stdout = stdout(&evigraph(&[
        "--jobs",
        "3",
        "predict",
        "--checkpoint",
        s(&ck),
        "--srl",
        s(&d.join("srl.jsonl")),
    ]));
    assert_eq!(fs::read_to_string(&preds).unwrap(), on_stdout);
    let ids: Vec<String> = on_stdout
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["instance_id"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(ids.len(), 18);
    assert!(ids.windows(2).all(|w| w[0] < w[1]));

    let gold = d.join("gold.jsonl");
    let mut all = fs::read_to_string(d.join("dev.jsonl")).unwrap();
    all.push_str(&fs::read_to_string(d.join("train.jsonl")).unwrap());
    fs::write(&gold, all).unwrap();
    let o = evigraph(&["evaluate", "--preds", s(&preds), "--gold", s(&gold)]);
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["instances"], 18);
    for key in ["label_accuracy", "fever_score", "evidence_precision", "evidence_recall", "evidence_f1", "confusion"] {
        assert!(report.get(key).is_some(), "{key}");
    }
    assert!(String::from_utf8_lossy(&o.stderr).contains("FEVER score"));
    let o = evigraph(&["evaluate", "--preds", s(&preds), "--gold", s(&d.join("dev.jsonl"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unmatched"));
}

#[test]
fn config_env_var_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"seed": 5}"#).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_evigraph"))
        .args(["synth", "--n", "3", "--dev", "0", "--out", s(dir.path())])
        .env("EVIGRAPH_CONFIG", &cfg)
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["seed"], 5);
    let o = Command::new(env!("CARGO_BIN_EXE_evigraph"))
        .args(["--seed", "8", "synth", "--n", "3", "--dev", "0", "--out", s(dir.path())])
        .env("EVIGRAPH_CONFIG", &cfg)
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["seed"], 8);
}

#[test]
fn ablate_prints_four_variants() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "6", "3");
    let o = evigraph(&[
        "--preset",
        "desk",
        "--set",
        "stage1_epochs=1",
        "--set",
        "stage2_epochs=1",
        "ablate",
        "--dataset",
        s(&d.join("train.jsonl")),
        "--dev",
        s(&d.join("dev.jsonl")),
        "--srl",
        s(&d.join("srl.jsonl")),
        "--seeds",
        "0",
    ]);
    let rows: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let names: Vec<&str> = rows.as_array().unwrap().iter().map(|r| r["variant"].as_str().unwrap()).collect();
    assert_eq!(names, ["full", "no-reorder", "no-graph", "no-both"]);
    assert_eq!(rows[3]["graphs_built"], 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no-both"));
}
