use std::path::Path;
use std::process::{Command, Output};

fn dida(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dida"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn dida")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn tiny_expert(dir: &Path) {
    ok(&dida(dir, &["expert", "--iterations", "2", "--episodes", "2", "--out", "exp"]));
    assert!(dir.join("exp/corpus.jsonl").exists());
    assert!(dir.join("exp/policy.json").exists());
}

#[test]
fn help_lists_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(&dida(dir.path(), &["--help"]));
    for cmd in ["expert", "corrupt", "train", "eval", "diagnose"] {
        assert!(text.contains(cmd), "missing {cmd} in help:\n{text}");
    }
}

#[test]
fn pipeline_summary_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    tiny_expert(d);
    ok(&dida(d, &["corrupt", "--corpus", "exp/corpus.jsonl", "--kind", "gaussian", "--sigma", "0.5", "--out", "noisy"]));
    assert!(d.join("noisy/noise.json").exists());
    std::fs::write(
        d.join("cfg.json"),
        r#"{"name":"golden","corpus":"exp/corpus.jsonl","noise":{"file":"noisy/noise.json"},"seeds":[0,1],"out":"runs","eval_episodes":3}"#,
    )
    .unwrap();
    let summary = ok(&dida(d, &["--config", "cfg.json", "train", "--iterations", "2"]));
    let golden = include_str!("golden/summary.txt");
    assert_eq!(summary, golden);

    let metrics = std::fs::read_to_string(d.join("runs/golden/0/metrics.jsonl")).unwrap();
    assert_eq!(metrics.lines().count(), 2);
    for line in metrics.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["p_acc"].is_number() && v["lambda"].is_number());
    }

    let eval = ok(&dida(d, &["eval", "--checkpoint", "runs/golden/0", "--episodes", "3"]));
    assert!(eval.starts_with("eval over 3 episodes:"), "{eval}");
}

#[test]
fn eval_without_checkpoint_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = dida(dir.path(), &["eval", "--checkpoint", "missing"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no policy checkpoint"));
}

#[test]
fn corrupt_requires_an_operator() {
    let dir = tempfile::tempdir().unwrap();
    let out = dida(dir.path(), &["corrupt", "--corpus", "c.jsonl"]);
    assert!(!out.status.success());
}

#[test]
fn train_rejects_unknown_anchor() {
    let dir = tempfile::tempdir().unwrap();
    tiny_expert(dir.path());
    let out = dida(dir.path(), &["train", "--corpus", "exp/corpus.jsonl", "--kind", "shuffle", "--anchor", "zebra"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown anchor"));
}

#[test]
fn occupancy_diagnostic_passes() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(&dida(dir.path(), &["diagnose", "occupancy", "--draws", "25"]));
    assert!(text.starts_with("occupancy: 25 draws"), "{text}");
}
