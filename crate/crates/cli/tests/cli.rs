use std::path::Path;
use std::process::{Command, Output};

fn condact(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_condact"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn train_synthetic(out_dir: &Path, extra: &[&str]) -> Output {
    let dir = out_dir.to_str().unwrap();
    let mut args = vec![
        "train",
        "--synthetic",
        "400",
        "--layers",
        "3",
        "--neurons",
        "8",
        "--hetero",
        "--epochs",
        "6",
        "--batch-size",
        "20",
        "--seed",
        "3",
        "--seed",
        "4",
        "--out",
        dir,
    ];
    args.extend_from_slice(extra);
    condact(&args)
}

#[test]
fn paramcount_table_lists_reference_structures() {
    let out = condact(&["paramcount", "--table"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for n in ["638810", "639210", "99810", "89610", "89710"] {
        assert!(text.contains(n), "{n} missing from\n{text}");
    }
    let single = condact(&[
        "paramcount",
        "--layers",
        "3",
        "--neurons",
        "100",
        "--hetero",
    ]);
    assert_eq!(stdout(&single).trim(), "89710");
}

#[test]
fn train_writes_identical_csvs_for_identical_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(train_synthetic(a.path(), &[]).status.success());
    assert!(train_synthetic(b.path(), &[]).status.success());
    for seed in [3, 4] {
        let name = format!("3l8n_hetero_seed{seed}.csv");
        let x = std::fs::read_to_string(a.path().join(&name)).unwrap();
        let y = std::fs::read_to_string(b.path().join(&name)).unwrap();
        assert_eq!(x, y);
        let lines: Vec<&str> = x.lines().collect();
        assert_eq!(lines[0], "epoch,train_error,test_error");
        assert_eq!(lines.len(), 7);
    }
}

#[test]
fn config_file_and_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"layers": 3, "neurons": 6, "heterogeneous": true, "seeds": [1], "epochs": 5,
            "batch_size": 25, "dataset": {"kind": "synthetic_sync", "train": 200, "test": 50, "seed": 0}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = condact(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--checkpoint",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out_dir.join("3l6n_hetero_seed1.csv").exists());
    let ckpt = std::fs::read_to_string(out_dir.join("3l6n_hetero_seed1.json")).unwrap();
    assert!(ckpt.contains("condact-checkpoint/v1"));
}

#[test]
fn compare_prints_both_rows() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, hetero: bool| {
        let path = dir.path().join(name);
        let body = format!(
            r#"{{"layers": 3, "neurons": 8, "heterogeneous": {hetero}, "seeds": [0, 1], "epochs": 5,
                "batch_size": 20, "dataset": {{"kind": "synthetic_sync", "train": 200, "test": 100, "seed": 2}}}}"#
        );
        std::fs::write(&path, body).unwrap();
        path
    };
    let base = write("base.json", false);
    let cand = write("cand.json", true);
    let out = condact(&["compare", base.to_str().unwrap(), cand.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(text.contains("homo") && text.contains("hetero"), "{text}");
}

#[test]
fn gradcheck_passes_for_heterogeneous_net() {
    let out = condact(&[
        "gradcheck",
        "--hetero",
        "--neurons",
        "10",
        "--input-dim",
        "12",
    ]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).contains("max relative error"));
}

#[test]
fn missing_data_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere");
    let out = condact(&[
        "train",
        "--epochs",
        "1",
        "--data-dir",
        missing.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn divergence_has_its_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = train_synthetic(dir.path(), &["--lr", "1e30"]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"layers": 3, "learning_rate": 0.1}"#).unwrap();
    let out = condact(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
