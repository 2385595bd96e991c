use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_pqsim");

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let status = Command::new(BIN).arg("bogus").status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn invalid_values_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN).arg("--out").arg(dir.path()).args(["sample", "--eps", "3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eps"));
}

#[test]
fn missing_config_file_is_reported() {
    let status = Command::new(BIN).args(["--config", "/nonexistent/run.json", "sample"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn oracle_compare_writes_tv_distance() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(BIN)
        .arg("--out")
        .arg(dir.path())
        .args(["oracle-compare", "--samples", "500", "--mc-assignments", "5000"])
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(dir.path().join("oracle_compare.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let tv = v["tv_distance"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&tv));
    assert_eq!(v["command"], "oracle-compare");
}

#[test]
fn sample_records_start_with_a_header() {
    let dir = tempfile::tempdir().unwrap();
    let status =
        Command::new(BIN).arg("--out").arg(dir.path()).args(["--seed", "3", "sample", "--samples", "50"]).status().unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(dir.path().join("samples.jsonl")).unwrap();
    let mut lines = text.lines();
    let header: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(header["seed"], 3);
    assert!(lines.count() >= 50);
}

#[test]
fn inline_model_config_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("model.json");
    std::fs::write(
        &cfg,
        r#"{"lattice": {"dims": [2]}, "terms": [{"preset": "exchange_nn", "strength": 1.0}],
            "kappa": 4.0, "noise": "z_measure", "t": 0.3, "initial": "zero"}"#,
    )
    .unwrap();
    let out = Command::new(BIN)
        .arg("--out")
        .arg(dir.path())
        .args(["--config", cfg.to_str().unwrap(), "sample", "--samples", "100"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
