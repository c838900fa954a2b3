//! Drives the compiled binary end to end: generate → train → evaluate →
//! stats → report, plus the exit-code contract.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fairdistill"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn binary");
    assert!(
        out.status.success(),
        "`fairdistill {}` failed:\n{}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generate_bias_plants_decreasing_bayes_auc() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data");
    run_ok(&[
        "generate",
        "--out",
        out.to_str().unwrap(),
        "--n-samples",
        "300",
        "--n-features",
        "6",
        "--bias",
        "0.5",
        "--seed",
        "3",
    ]);
    let oracle = read_json(&out.join("oracle.json"));
    let groups = oracle["per_group"].as_array().unwrap();
    assert_eq!(groups.len(), 2);
    let b0 = groups[0]["bayes_auc"].as_f64().unwrap();
    let b1 = groups[1]["bayes_auc"].as_f64().unwrap();
    assert!(b1 < b0, "bias must degrade higher-index groups: {b0} vs {b1}");

    // byte-identical on a repeated run with the same seed
    let out2 = dir.path().join("data2");
    run_ok(&[
        "generate",
        "--out",
        out2.to_str().unwrap(),
        "--n-samples",
        "300",
        "--n-features",
        "6",
        "--bias",
        "0.5",
        "--seed",
        "3",
    ]);
    assert_eq!(
        std::fs::read(out.join("dataset.csv")).unwrap(),
        std::fs::read(out2.join("dataset.csv")).unwrap()
    );
}

#[test]
fn train_zero_epochs_writes_untrained_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    run_ok(&[
        "generate",
        "--out",
        data.to_str().unwrap(),
        "--n-samples",
        "300",
        "--n-features",
        "6",
        "--bias",
        "0.5",
        "--seed",
        "4",
    ]);
    let dataset = data.join("dataset.csv");

    let zero_a = dir.path().join("zero_a");
    let zero_b = dir.path().join("zero_b");
    let trained = dir.path().join("trained");
    for (out, epochs) in [(&zero_a, "0"), (&zero_b, "0"), (&trained, "2")] {
        run_ok(&[
            "train",
            "--data",
            dataset.to_str().unwrap(),
            "--method",
            "erm",
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "11",
            "--max-epochs",
            epochs,
            "--hidden",
            "8",
        ]);
    }
    // zero-epoch runs reproduce the seeded initialization bit for bit and
    // record nothing
    assert_eq!(
        std::fs::read(zero_a.join("erm.ckpt.json")).unwrap(),
        std::fs::read(zero_b.join("erm.ckpt.json")).unwrap()
    );
    let record = read_json(&zero_a.join("record_erm.json"));
    assert_eq!(record["epochs"].as_array().unwrap().len(), 0);
    assert_eq!(record["best_epoch"], 0);
    // an actual training run moves the parameters
    assert_ne!(
        std::fs::read(zero_a.join("erm.ckpt.json")).unwrap(),
        std::fs::read(trained.join("erm.ckpt.json")).unwrap()
    );
}

#[test]
fn full_fairdi_flow_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    run_ok(&[
        "generate",
        "--out",
        data.to_str().unwrap(),
        "--n-samples",
        "320",
        "--n-features",
        "6",
        "--bias",
        "0.5",
        "--seed",
        "6",
    ]);
    let run = dir.path().join("run");
    run_ok(&[
        "train",
        "--data",
        data.join("dataset.csv").to_str().unwrap(),
        "--method",
        "fairdi",
        "--out",
        run.to_str().unwrap(),
        "--seed",
        "13",
        "--max-epochs",
        "2",
        "--hidden",
        "8",
        "--split",
        "0.6,0.2,0.2",
    ]);
    // exactly one backbone, one teacher per group, one student
    for f in [
        "backbone.ckpt.json",
        "teacher_0.ckpt.json",
        "teacher_1.ckpt.json",
        "student.ckpt.json",
    ] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    assert!(!run.join("teacher_2.ckpt.json").exists());

    let eval = dir.path().join("eval");
    run_ok(&[
        "evaluate",
        "--checkpoint",
        run.join("student.ckpt.json").to_str().unwrap(),
        "--data",
        data.join("dataset.csv").to_str().unwrap(),
        "--splits",
        run.join("splits.json").to_str().unwrap(),
        "--split",
        "test",
        "--out",
        eval.to_str().unwrap(),
    ]);
    let report = read_json(&eval.join("report.json"));
    assert!(report["primary"]["overall"].as_f64().unwrap() > 0.0);

    // consolidated summary carries all four stage runtimes
    std::fs::copy(eval.join("report.json"), run.join("report.json")).unwrap();
    run_ok(&["report", "--dir", run.to_str().unwrap()]);
    let summary = read_json(&run.join("summary.json"));
    let stages: Vec<String> = summary["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["stage"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(stages.len(), 4, "stages: {stages:?}");
    for s in [
        "step0_fis",
        "step1_teacher_0",
        "step1_teacher_1",
        "step2_student",
    ] {
        assert!(stages.iter().any(|x| x == s), "missing stage {s}");
        assert!(
            summary["timing"]["stage_wall_time_secs"][s].as_f64().is_some(),
            "missing runtime for {s}"
        );
    }
    assert_eq!(summary["evaluation"], report);
}

#[test]
fn evaluate_group_values_fixture_reproduces_table_row() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = dir.path().join("row.json");
    // group AUCs reconstructed from a published row: overall 0.9447,
    // min 0.9266, gap 0.0201
    std::fs::write(
        &fixture,
        r#"{"metric":"auc","overall":0.9447,"groups":{"0":0.9266,"1":0.9467}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    run_ok(&[
        "evaluate",
        "--group-values",
        fixture.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let report = read_json(&out.join("report.json"));
    let p = &report["primary"];
    assert!((p["equity_scaled"].as_f64().unwrap() - 0.9353).abs() < 5e-4);
    assert!((p["mean_psd"].as_f64().unwrap() - 1.06e-2).abs() < 5e-4);
    assert!((p["max_psd"].as_f64().unwrap() - 2.13e-2).abs() < 5e-4);
    assert!((p["gap"].as_f64().unwrap() - 0.0201).abs() < 1e-12);
}

#[test]
fn stats_chi2_fixture_and_cd() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.csv");
    // ranks always (1,2,3) over four tasks → χ² = 8
    std::fs::write(
        &scores,
        "task,a,b,c\nt1,0.9,0.8,0.7\nt2,0.95,0.85,0.75\nt3,0.9,0.8,0.7\nt4,0.99,0.98,0.97\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    run_ok(&[
        "stats",
        "--scores",
        scores.to_str().unwrap(),
        "--alpha",
        "0.05",
        "--out",
        out.to_str().unwrap(),
    ]);
    let stats = read_json(&out.join("stats.json"));
    assert!((stats["chi2"].as_f64().unwrap() - 8.0).abs() < 1e-12);
    assert_eq!(stats["gate_passed"], true);
    assert!(out.join("ranks.csv").exists());

    // the 5-algorithm / 11-task configuration
    let mut rows = String::from("task,m1,m2,m3,m4,m5\n");
    for t in 0..11 {
        rows.push_str(&format!("t{t},0.9,0.8,0.7,0.6,0.5\n"));
    }
    let scores11 = dir.path().join("scores11.csv");
    std::fs::write(&scores11, rows).unwrap();
    let out11 = dir.path().join("out11");
    run_ok(&[
        "stats",
        "--scores",
        scores11.to_str().unwrap(),
        "--out",
        out11.to_str().unwrap(),
    ]);
    let stats = read_json(&out11.join("stats.json"));
    assert!((stats["critical_difference"].as_f64().unwrap() - 1.839).abs() < 1e-3);
}

#[test]
fn out_root_env_var_anchors_relative_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("FAIRDISTILL_OUT_ROOT", dir.path())
        .args([
            "generate",
            "--out",
            "nested/data",
            "--n-samples",
            "50",
            "--n-features",
            "4",
            "--seed",
            "1",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("nested/data/dataset.csv").exists());
}

#[test]
fn missing_inputs_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "train",
            "--data",
            dir.path().join("nope.csv").to_str().unwrap(),
            "--method",
            "erm",
            "--out",
            dir.path().join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    let out = bin()
        .args([
            "report",
            "--dir",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
