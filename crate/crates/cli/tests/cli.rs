use std::path::Path;
use std::process::{Command, Output};

fn echo_lab(args: &[&str], seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_echo-lab"));
    cmd.args(args).env("RUST_LOG", "warn");
    match seed_env {
        Some(v) => cmd.env("ECHO_LAB_SEED", v),
        None => cmd.env_remove("ECHO_LAB_SEED"),
    };
    cmd.output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(echo_lab(&["frobnicate"], None).status.code(), Some(2));
    assert_eq!(echo_lab(&["gen"], None).status.code(), Some(2));
    assert_eq!(echo_lab(&["gen", "--out", "x", "--family", "octagon"], None).status.code(), Some(2));
    assert_eq!(echo_lab(&["gen", "--out", "x"], Some("seven")).status.code(), Some(2));
    assert_eq!(echo_lab(&["--help"], None).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let out = echo_lab(&["eval", "--checkpoint", path(&missing), "--dataset", path(&missing)], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn gen_seed_flag_and_env_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    let out = echo_lab(&["gen", "--family", "shoebox", "--count", "5", "--seed", "7", "--out", path(&a)], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(echo_lab(&["gen", "--family", "shoebox", "--count", "5", "--out", path(&b)], Some("7")).status.success());
    assert!(echo_lab(&["gen", "--family", "shoebox", "--count", "5", "--out", path(&c)], Some("8")).status.success());
    let manifest = |p: &Path| std::fs::read(p.join("manifest.json")).unwrap();
    assert_eq!(manifest(&a), manifest(&b));
    assert_ne!(manifest(&a), manifest(&c));
    let m: serde_json::Value = serde_json::from_slice(&manifest(&a)).unwrap();
    let samples = m["samples"].as_array().unwrap();
    assert_eq!(samples.len(), 5);
    assert!(samples.iter().all(|s| s["family"] == "shoebox"));
}

#[test]
fn train_eval_render_saliency() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run = dir.path().join("run");
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"train": {"steps": 2, "batch_size": 2, "val_every": 1, "log_every": 0}}"#).unwrap();
    assert!(echo_lab(&["gen", "--config", path(&cfg), "--count", "4", "--out", path(&data)], None).status.success());
    let out = echo_lab(&["train", "--config", path(&cfg), "--dataset", path(&data), "--out", path(&run)], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ckpt = run.join("model.ckpt");
    assert!(ckpt.exists() && run.join("train-log.json").exists());

    let out = echo_lab(&["eval", "--checkpoint", path(&ckpt), "--dataset", path(&data)], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for k in ["iou_2d", "iou_3d", "mse_lw", "mse_h", "by_family", "by_visibility"] {
        assert!(report.get(k).is_some(), "{k}");
    }
    assert_eq!(report["count"], 4);

    let pgm = dir.path().join("r.pgm");
    let out = echo_lab(&["render", "--dataset", path(&data), "--index", "1", "--checkpoint", path(&ckpt), "--scale", "1", "--out", path(&pgm)], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read(&pgm).unwrap().starts_with(b"P5\n65 32\n255\n"));

    let out = echo_lab(&["saliency", "--checkpoint", path(&ckpt), "--dataset", path(&data)], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let map: Vec<f64> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(map.len(), 512);
    assert!(map.iter().all(|v| (0.0..=1.0).contains(v)));
}
