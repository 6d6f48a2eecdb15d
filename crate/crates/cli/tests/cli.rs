use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ppg2ecg::Report;

fn ppg2ecg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppg2ecg"))
        .arg("--quiet")
        .args(args)
        .output()
        .expect("spawn ppg2ecg")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth_sessions(dir: &Path, json: &str) {
    let cfg = dir.join("synth.json");
    fs::write(&cfg, json).unwrap();
    let out = ppg2ecg(&["synth", "--config", p(&cfg), "--out", p(&dir.join("data"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = ppg2ecg(&["evaluate", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn help_exits_zero() {
    let out = ppg2ecg(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["synth", "preprocess", "train", "reconstruct", "evaluate", "sweep", "profile-test"] {
        assert!(text.contains(cmd), "missing {cmd}");
    }
}

#[test]
fn bad_grid_is_usage_error() {
    let out = ppg2ecg(&["sweep", "--in", "x", "--grid", "2:0:40", "--report", "r.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"hr_jitter": 0.5}"#).unwrap();
    let out = ppg2ecg(&["synth", "--config", p(&cfg), "--out", p(&dir.path().join("s"))]);
    assert_eq!(out.status.code(), Some(1));
    fs::write(&cfg, r#"{"no_such_field": 1}"#).unwrap();
    let out = ppg2ecg(&["train", "--in", "x", "--config", p(&cfg), "--model", "m.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_session_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = ppg2ecg(&["evaluate", "--in", p(&dir.path().join("nope")), "--report", p(&dir.path().join("r.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_csv_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    synth_sessions(dir.path(), r#"{"duration_s": 30}"#);
    let data = dir.path().join("data");
    fs::write(data.join("signals.csv"), "index,ppg,ecg\n0,1,x\n").unwrap();
    let out = ppg2ecg(&["train", "--in", p(&data), "--model", p(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn evaluate_many_sessions_aggregates_all() {
    let dir = tempfile::tempdir().unwrap();
    synth_sessions(dir.path(), r#"{"duration_s": 40, "count": 42, "noise_std": 0.02}"#);
    let data = dir.path().join("data");
    let mut names: Vec<String> = fs::read_dir(&data)
        .unwrap()
        .map(|e| e.unwrap().path().to_str().unwrap().to_string())
        .collect();
    names.sort();
    assert_eq!(names.len(), 42);
    let report = dir.path().join("out/report.json");
    let mut args = vec!["evaluate", "--report", p(&report), "--in"];
    args.extend(names.iter().map(String::as_str));
    let out = ppg2ecg(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let r = Report::load(&report).unwrap();
    assert_eq!(r.aggregate.as_ref().unwrap().n, 42);
    assert_eq!(r.sessions.len(), 42);
    assert!(r.sessions.windows(2).all(|w| w[0].session_id < w[1].session_id));
    assert!(r.profile.is_some());
    let csv = fs::read_to_string(report.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().count(), 43);

    let prof = dir.path().join("profile.json");
    let out = ppg2ecg(&["profile-test", "--report", p(&report), "--out", p(&prof)]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&prof).unwrap()).unwrap();
    assert_eq!(v["rho"]["n"], 42);
    let pval = v["rrmse"]["p_value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&pval));
}

#[test]
fn preprocess_writes_cycle_matrices() {
    let dir = tempfile::tempdir().unwrap();
    synth_sessions(dir.path(), r#"{"duration_s": 60, "ppg_delay": 45}"#);
    let out_dir = dir.path().join("cycles");
    let out = ppg2ecg(&["preprocess", "--in", p(&dir.path().join("data")), "--out", p(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cx = fs::read_to_string(out_dir.join("c_x.csv")).unwrap();
    let rows: Vec<&str> = cx.lines().collect();
    assert!((70..=76).contains(&rows.len()), "{}", rows.len());
    assert!(rows.iter().all(|r| r.split(',').count() == 300));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("cycles.json")).unwrap()).unwrap();
    assert_eq!(meta["sample_shift"], -45);
    assert_eq!(meta["cycle_delay"], 0);
    assert_eq!(meta["n_cycles"], rows.len());
    assert_eq!(meta["boundaries"].as_array().unwrap().len(), rows.len());
}

#[test]
fn scheme_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    synth_sessions(dir.path(), r#"{"duration_s": 60}"#);
    let data = dir.path().join("data");
    let model = dir.path().join("m.json");
    let out = ppg2ecg(&["--scheme", "SR", "train", "--in", p(&data), "--model", p(&model)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(&model).unwrap().contains("\"SR\""));
    // The model fixes the scheme; asking for another one is refused.
    let out = ppg2ecg(&["--scheme", "R2R", "reconstruct", "--in", p(&data), "--model", p(&model), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seed_flag_changes_synthetic_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.json");
    fs::write(&cfg, r#"{"duration_s": 20}"#).unwrap();
    let read = |seed: &str, name: &str| {
        let out_dir = dir.path().join(name);
        assert!(ppg2ecg(&["--seed", seed, "synth", "--config", p(&cfg), "--out", p(&out_dir)]).status.success());
        fs::read(out_dir.join("signals.csv")).unwrap()
    };
    assert_eq!(read("3", "a"), read("3", "b"));
    assert_ne!(read("3", "c"), read("4", "d"));
}
