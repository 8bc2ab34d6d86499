use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn aha(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aha"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .env_remove("AHA_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A corpus and models small enough for a debug build.
fn tiny_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.json");
    let out = dir.join("out");
    let json = format!(
        r#"{{
  "synthetic": {{"classes_per_alphabet": 3}},
  "output_dir": {out:?},
  "ltm": {{"filters": 16, "epochs": 1, "max_train_images": 120, "holdout": 24}},
  "aha": {{"pr": {{"hidden": 32, "lr": 0.01, "steps": 10}}, "pm": {{"hidden": 16, "lr": 0.01, "steps": 10}}}},
  "fastnn": {{"hidden": 32, "lr": 0.01, "steps": 10}},
  "sweep": {{"levels": 3, "seeds": 1, "runs": 1}}
}}"#
    );
    fs::write(&path, json).unwrap();
    path
}

#[test]
fn sweep_then_report_draws_one_chart_per_task_and_kind() {
    let tmp = TempDir::new().unwrap();
    let cfg = tiny_config(tmp.path());
    let cfg = cfg.to_str().unwrap();
    let o = aha(tmp.path(), &["--config", cfg, "pretrain"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = aha(tmp.path(), &["--config", cfg, "--fast", "--workers", "1", "sweep"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = aha(tmp.path(), &["--config", cfg, "report"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let out = tmp.path().join("out");
    let mut svgs: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".svg"))
        .collect();
    svgs.sort();
    assert_eq!(
        svgs,
        [
            "classification_noise.svg",
            "classification_occlusion.svg",
            "instance_noise.svg",
            "instance_occlusion.svg"
        ]
    );
    assert!(out.join("aggregate.csv").exists());
    assert!(out.join("recall_aggregate.csv").exists());
}

#[test]
fn report_on_empty_csv_exits_3() {
    let tmp = TempDir::new().unwrap();
    let empty = tmp.path().join("results.csv");
    fs::write(&empty, "").unwrap();
    let o = aha(tmp.path(), &["report", "--results", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("no results"), "{}", stderr(&o));
}

#[test]
fn report_without_results_file_exits_3() {
    let tmp = TempDir::new().unwrap();
    let o = aha(tmp.path(), &["report", "--results", "missing.csv"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn pretrain_with_same_seed_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = tiny_config(tmp.path());
    let cfg = cfg.to_str().unwrap();
    let ckpt = tmp.path().join("out").join("ltm.ckpt");
    let o = aha(tmp.path(), &["--config", cfg, "--seed", "7", "pretrain"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = fs::read(&ckpt).unwrap();
    let o = aha(tmp.path(), &["--config", cfg, "--seed", "7", "pretrain"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(first, fs::read(&ckpt).unwrap());
}

#[test]
fn effective_config_is_echoed_with_overrides() {
    let tmp = TempDir::new().unwrap();
    let cfg = tiny_config(tmp.path());
    let o = aha(tmp.path(), &["--config", cfg.to_str().unwrap(), "--seed", "11", "pretrain"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let echo = fs::read_to_string(tmp.path().join("out").join("config.json")).unwrap();
    assert!(echo.contains("\"seed\": 11"), "{echo}");
}

#[test]
fn unknown_config_key_exits_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, r#"{"sede": 3}"#).unwrap();
    let o = aha(tmp.path(), &["--config", cfg.to_str().unwrap(), "sweep"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sede"));
}

#[test]
fn out_of_range_config_exits_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, r#"{"aha": {"ps": {"dropout": 1.5}}}"#).unwrap();
    let o = aha(tmp.path(), &["--config", cfg.to_str().unwrap(), "pretrain"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_without_checkpoint_exits_3() {
    let tmp = TempDir::new().unwrap();
    let cfg = tiny_config(tmp.path());
    let o = aha(tmp.path(), &["--config", cfg.to_str().unwrap(), "sweep"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn missing_dataset_exits_3() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("c.json");
    fs::write(&cfg, r#"{"data_dir": "nowhere"}"#).unwrap();
    let o = aha(tmp.path(), &["--config", cfg.to_str().unwrap(), "pretrain"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}
