//! End-to-end runs of the `ggad` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SPEC: &str = r#"{
  "num_nodes": 300,
  "num_blocks": 4,
  "intra_block_edge_prob": 0.08,
  "inter_block_edge_prob": 0.004,
  "feature_dim": 24,
  "feature_domain_shift": { "scale": 1.0, "rotation": 0.3 },
  "anomaly_ratio": 0.05,
  "seed": 5
}"#;

fn ggad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ggad")).args(args).output().expect("spawn ggad")
}

fn ok(args: &[&str]) -> String {
    let out = ggad(args);
    assert!(
        out.status.success(),
        "ggad {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes the spec and generates a graph under `dir/name`.
fn synth(dir: &Path, name: &str) -> PathBuf {
    let spec = dir.join("spec.json");
    fs::write(&spec, SPEC).unwrap();
    let out = dir.join(name);
    ok(&["synth", "--spec", p(&spec), "--out", p(&out)]);
    out
}

fn trained(dir: &Path, epochs: &str) -> (PathBuf, PathBuf) {
    let g = synth(dir, "src");
    let a = dir.join("model.json");
    ok(&["train", "--sources", p(&g), "--epochs", epochs, "--out", p(&a)]);
    (g, a)
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|f| (f.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&f).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn synth_is_reproducible() {
    let t = TempDir::new().unwrap();
    let a = synth(t.path(), "a");
    fs::rename(&a, t.path().join("first")).unwrap();
    let b = synth(t.path(), "a");
    assert_eq!(read_dir_bytes(&t.path().join("first")), read_dir_bytes(&b));
}

#[test]
fn train_without_labels_names_the_missing_file() {
    let t = TempDir::new().unwrap();
    let g = synth(t.path(), "src");
    fs::remove_file(g.join("labels.csv")).unwrap();
    let out = ggad(&["train", "--sources", p(&g), "--epochs", "1", "--out", p(&t.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("labels.csv"), "{err}");
    assert!(!t.path().join("m.json").exists());
}

#[test]
fn zero_epochs_warns_but_writes_an_artifact() {
    let t = TempDir::new().unwrap();
    let g = synth(t.path(), "src");
    let a = t.path().join("m.json");
    let out = ggad(&["train", "--sources", p(&g), "--epochs", "0", "--out", p(&a)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).to_lowercase().contains("epochs = 0"));
    assert!(a.exists());
}

#[test]
fn identical_training_runs_write_identical_artifacts() {
    let t = TempDir::new().unwrap();
    let g = synth(t.path(), "src");
    let a = t.path().join("a.json");
    let b = t.path().join("b.json");
    let hist = t.path().join("h.csv");
    let log = ok(&["train", "--sources", p(&g), "--epochs", "5", "--seed", "2", "--out", p(&a), "--history", p(&hist)]);
    ok(&["train", "--sources", p(&g), "--epochs", "5", "--seed", "2", "--out", p(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(log.lines().filter(|l| l.starts_with("epoch")).count(), 5);
    assert_eq!(fs::read_to_string(&hist).unwrap().lines().count(), 6);
}

#[test]
fn infer_writes_one_row_per_node_and_a_report() {
    let t = TempDir::new().unwrap();
    let (g, a) = trained(t.path(), "3");
    let s = t.path().join("scores.csv");
    ok(&["infer", "--artifact", p(&a), "--target", p(&g), "--out", p(&s)]);
    let text = fs::read_to_string(&s).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("node_id,rs,as,s_ad,final"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 300);
    for (i, r) in rows.iter().enumerate() {
        let cols: Vec<&str> = r.split(',').collect();
        assert_eq!(cols.len(), 5);
        assert_eq!(cols[0], i.to_string());
        assert!(cols[1..].iter().all(|c| c.parse::<f64>().unwrap().is_finite()));
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(t.path().join("scores.report.json")).unwrap()).unwrap();
    assert_eq!(report["num_nodes"], 300);
    assert_eq!(report["config"]["k_vote"], 1);
}

#[test]
fn out_of_range_vote_threshold_is_rejected() {
    let t = TempDir::new().unwrap();
    let (g, a) = trained(t.path(), "1");
    let out = ggad(&["infer", "--artifact", p(&a), "--target", p(&g), "--k-vote", "4", "--out", p(&t.path().join("s.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains('3'));
}

#[test]
fn scoring_the_training_source_reports_no_drift() {
    let t = TempDir::new().unwrap();
    let (g, a) = trained(t.path(), "20");
    let m = t.path().join("m.json");
    ok(&["metrics", "--artifact", p(&a), "--target", p(&g), "--out", p(&m)]);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&m).unwrap()).unwrap();
    let nd = r["nd"].as_f64().unwrap();
    let sd = r["sd"].as_f64().unwrap();
    assert!(nd <= 0.05 && sd <= 0.05, "nd {nd} sd {sd}");
    assert!(r["ad"].as_f64().unwrap() <= 0.05);
}

#[test]
fn eval_of_perfect_scores_is_one() {
    let t = TempDir::new().unwrap();
    let labels = [0u8, 1, 0, 0, 1, 0, 0, 0];
    let lp = t.path().join("labels.csv");
    let sp = t.path().join("scores.csv");
    fs::write(&lp, labels.iter().map(|l| format!("{l}\n")).collect::<String>()).unwrap();
    let mut csv = String::from("node_id,final\n");
    for (i, l) in labels.iter().enumerate() {
        csv.push_str(&format!("{i},{}\n", f64::from(*l) + 0.01 * i as f64));
    }
    fs::write(&sp, csv).unwrap();
    let out = ok(&["eval", "--scores", p(&sp), "--labels", p(&lp)]);
    assert!(out.contains("auroc=1.0"), "{out}");
    assert!(out.contains("auprc=1.0"), "{out}");

    let short = t.path().join("short.csv");
    fs::write(&short, "node_id,final\n0,1.0\n").unwrap();
    assert_eq!(ggad(&["eval", "--scores", p(&short), "--labels", p(&lp)]).status.code(), Some(2));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let t = TempDir::new().unwrap();
    let g = synth(t.path(), "src");
    let cfg = t.path().join("cfg.json");
    fs::write(&cfg, r#"{ "epochs": 1, "learning_rat": 0.1 }"#).unwrap();
    let out = ggad(&["train", "--sources", p(&g), "--config", p(&cfg), "--out", p(&t.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rat"));
}

#[test]
fn help_lists_config_defaults() {
    let train = ok(&["train", "--help"]);
    assert!(train.contains("\"epochs\": 300"), "{train}");
    assert!(train.contains("\"learning_rate\": 0.005"));
    let infer = ok(&["infer", "--help"]);
    assert!(infer.contains("\"anomaly_ratio\": 0.05"), "{infer}");
    assert!(infer.contains("\"k_vote\": 1"));
}

#[test]
fn inject_adds_the_requested_anomalies() {
    let t = TempDir::new().unwrap();
    let g = synth(t.path(), "src");
    let out_dir = t.path().join("injected");
    let msg = ok(&[
        "inject", "--graph", p(&g), "--out", p(&out_dir), "--cliques", "2", "--clique-size", "5", "--attributes", "6",
    ]);
    let before = fs::read_to_string(g.join("labels.csv")).unwrap();
    let after = fs::read_to_string(out_dir.join("labels.csv")).unwrap();
    let count = |s: &str| s.lines().filter(|l| l.trim() == "1").count();
    assert!(count(&after) > count(&before), "{msg}");
    assert!(count(&after) <= count(&before) + 16);
    assert!(out_dir.join("inject.json").exists());
}

#[test]
fn ablate_and_sweep_write_their_tables() {
    let t = TempDir::new().unwrap();
    let (g, a) = trained(t.path(), "2");
    let csv = t.path().join("ablate.csv");
    let summary = t.path().join("summary.json");
    ok(&[
        "ablate", "--artifact", p(&a), "--targets", p(&g), "--seeds", "0,1", "--out", p(&csv), "--summary", p(&summary),
    ]);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 1 + 4 * 2);
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(s["wiring"].as_array().unwrap().len(), 4);

    let sweep = t.path().join("sweep.csv");
    ok(&["sweep-k", "--artifact", p(&a), "--target", p(&g), "--k-values", "1,3", "--seeds", "0", "--out", p(&sweep)]);
    let text = fs::read_to_string(&sweep).unwrap();
    assert!(text.starts_with("k_vote,seed,auroc,auprc,voted_positives\n"));
    assert_eq!(text.lines().count(), 3);
}
