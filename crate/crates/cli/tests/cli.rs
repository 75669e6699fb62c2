use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn sast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sast"))
        .args(args)
        .env_remove("SAST_OUT")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn quick() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs/quick.toml")
        .to_str()
        .unwrap()
        .to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Trains seed 1 of the quick configuration into `dir/train`.
fn trained(dir: &Path) -> PathBuf {
    let out = dir.join("train");
    let o = sast(&["train", "--config", &quick(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    out.join("seed-1/checkpoint.json")
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(sast(&[]).status.code(), Some(2));
    assert_eq!(sast(&["--help"]).status.code(), Some(0));
    assert_eq!(sast(&["train"]).status.code(), Some(2));
    let o = sast(&["train", "--config", "/nonexistent/run.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/run.toml"));
}

#[test]
fn invalid_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "[data]\nkind = \"synthetic\"\n[model]\nhidden = [4]\nalpha = 1.5\n[train]\nmethod = \"sast\"\nepochs = 1\n",
    )
    .unwrap();
    let o = sast(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("model.alpha"), "{}", stderr(&o));
}

#[test]
fn train_then_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained(dir.path());
    let ck = ck.to_str().unwrap();
    let train_dir = dir.path().join("train");
    for f in [
        "summary.json",
        "timing.json",
        "seed-2/checkpoint.json",
        "seed-1/train.csv",
        "seed-1/steps.csv",
        "seed-1/record.json",
    ] {
        assert!(train_dir.join(f).is_file(), "missing {f}");
    }
    let summary = json(&train_dir.join("summary.json"));
    assert_eq!(summary["schema_version"], 1);
    let csv = std::fs::read_to_string(train_dir.join("seed-1/train.csv")).unwrap();
    assert!(csv.starts_with("schema_version,"));
    assert_eq!(csv.lines().count(), 11);

    let eval = dir.path().join("eval");
    let o = sast(&[
        "corrupt-eval",
        "--checkpoint",
        ck,
        "--config",
        &quick(),
        "--split",
        "test",
        "--corrupt",
        "0,0.4",
        "--out",
        eval.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = json(&eval.join("eval.json"));
    assert_eq!(report["kind"], "eval");
    let clean = report["acc_hard"].as_f64().unwrap();
    assert!(clean > 0.8, "quick model should learn the task: {clean}");
    assert_eq!(report["corruption"][0][1].as_f64().unwrap(), clean);
    let delta = report["delta_transfer"].as_f64().unwrap();
    assert_eq!(delta, report["acc_surrogate"].as_f64().unwrap() - clean);
}

#[test]
fn hw_sim_and_diagnose_write_their_reports() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained(dir.path());
    let ck = ck.to_str().unwrap();
    let hw = dir.path().join("hw");
    let o = sast(&[
        "hw-sim",
        "--checkpoint",
        ck,
        "--config",
        &quick(),
        "--split",
        "test",
        "--out",
        hw.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&hw.join("hw.json"));
    assert_eq!(r["profile"]["name"], "loihi_like");
    assert!(r["report"]["ksynops"].as_f64().unwrap() > 0.0);
    assert!(r["agreement_with_hard"].as_f64().unwrap() > 0.5);
    assert!(hw.join("qnet.json").is_file() && hw.join("tables/hw.csv").is_file());

    let o = sast(&["hw-sim", "--checkpoint", ck, "--config", &quick(), "--profile", "tpu"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tpu"));

    let diag = dir.path().join("diag");
    let record = dir.path().join("train/seed-1/record.json");
    let o = sast(&[
        "diagnose",
        "--checkpoint",
        ck,
        "--config",
        &quick(),
        "--split",
        "val",
        "--probes",
        "10",
        "--record",
        record.to_str().unwrap(),
        "--out",
        diag.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["gamma", "lipschitz", "margins", "samband", "convergence"] {
        let r = json(&diag.join(format!("diagnostics/{f}.json")));
        assert_eq!(r["schema_version"], 1, "{f}");
    }
    let lip = json(&diag.join("diagnostics/lipschitz.json"));
    assert_eq!(lip["violations"], 0);
    assert_eq!(
        sast(&["diagnose", "--checkpoint", ck, "--config", &quick(), "--what", "vibes"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn checkpoint_and_dataset_shapes_must_agree() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained(dir.path());
    let cfg = dir.path().join("wide.toml");
    let text = std::fs::read_to_string(quick())
        .unwrap()
        .replace("classes = 2", "classes = 2\nwidth = 16\nheight = 16");
    std::fs::write(&cfg, text).unwrap();
    let o = sast(&[
        "eval",
        "--checkpoint",
        ck.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--split",
        "test",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("input dimension"), "{}", stderr(&o));
}

#[test]
fn output_directory_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_sast"))
        .args(["sweep-rho", "--config", &quick()])
        .env("SAST_OUT", &target)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let s = json(&target.join("summary.json"));
    assert!(s["table"]["best_rho"].as_f64().is_some(), "{s}");
    assert!(target.join("tables/sweep.csv").is_file());
}
