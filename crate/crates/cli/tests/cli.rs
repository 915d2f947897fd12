use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn eegvsr(dir: &Path, args: &[&str]) -> (bool, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_eegvsr"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs");
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 1, "expected one JSON line, got {stdout:?}");
    (out.status.success(), serde_json::from_str(lines[0]).unwrap())
}

#[test]
fn failures_print_a_json_error_and_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let (ok, v) = eegvsr(dir.path(), &["extract-mfcc", "--manifest", "missing.json"]);
    assert!(!ok);
    assert_eq!(v["error"]["kind"], "io");
    assert!(v["error"]["message"].as_str().unwrap().contains("missing.json"));

    std::fs::write(dir.path().join("bad.json"), "{not json").unwrap();
    let (ok, v) = eegvsr(dir.path(), &["--config", "bad.json", "gradcheck", "--seeds", "1"]);
    assert!(!ok);
    assert_eq!(v["error"]["kind"], "config");

    let status = Command::new(env!("CARGO_BIN_EXE_eegvsr"))
        .args(["train", "--manifest", "m.json", "--condition", "audio"])
        .output()
        .unwrap()
        .status;
    assert!(!status.success());
}

#[test]
fn small_end_to_end_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("cfg.json"),
        r#"{
            "synth": {"n_sentences": 2, "n_reps": 1, "n_subjects": 2, "test_subjects": 1},
            "features": {"video_factor": 10, "kpca_fit_frames": 120},
            "train": {"batch_size": 2, "val_split": 0.0, "conv_filters": 2, "video_embed": 4,
                      "gru_sizes": [8, 6], "tcn_filters": 4}
        }"#,
    )
    .unwrap();
    let run = |args: &[&str]| {
        let mut full = vec!["--config", "cfg.json", "--out-dir", "out"];
        full.extend_from_slice(args);
        let (ok, v) = eegvsr(d, &full);
        assert!(ok, "{args:?} failed: {v}");
        v
    };
    let m = "out/manifest.json";
    assert_eq!(run(&["synth-data"])["utterances"], 4);
    run(&["extract-eeg", "--manifest", m]);
    run(&["extract-mfcc", "--manifest", m]);
    run(&["extract-video", "--manifest", m]);
    assert_eq!(run(&["kpca-fit", "--manifest", m])["components"], 30);
    run(&["kpca-apply", "--manifest", m, "--model", "out/kpca"]);
    run(&["train-lm", "--manifest", m]);
    let t = run(&["train", "--manifest", m, "--condition", "video+eeg+mfcc", "--epochs", "1"]);
    assert!(t["final_train_loss"].as_f64().unwrap().is_finite());
    let e = run(&[
        "evaluate", "--manifest", m, "--checkpoint", "out/checkpoint", "--lm-path", "out/lm.json",
    ]);
    assert_eq!(e["utterances"], 2);
    assert!(d.join("out/report.json").exists());
    let manifest: Value = serde_json::from_slice(&std::fs::read(d.join(m)).unwrap()).unwrap();
    let id = manifest["utterances"][0]["id"].as_str().unwrap();
    let dec = run(&["decode", "--manifest", m, "--checkpoint", "out/checkpoint", "--id", id, "--greedy"]);
    assert!(dec["hypothesis"].is_string());
}
