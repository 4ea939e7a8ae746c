use assert_cmd::Command;
use predicates::str::contains;

fn qbridge() -> Command {
    Command::cargo_bin("qbridge").unwrap()
}

fn csv_rows(out: &[u8]) -> Vec<Vec<f64>> {
    let text = std::str::from_utf8(out).unwrap();
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn classical_table() {
    let out = qbridge()
        .args(["transform", "--q", "1.0", "--lambda", "1", "--h", "identity", "--grid", "0:5:6"])
        .assert()
        .success()
        .get_output()
        .stdout
        .clone();
    let text = String::from_utf8(out.clone()).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "x,g,J,u,p_tsallis,p_shannon_pushforward,transport_residual"
    );
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 6);
    for r in rows {
        assert_eq!(r[1], 1.0);
        assert_eq!(r[2], 1.0);
        assert_eq!(r[3], r[0]);
        assert!(r[6].abs() < 1e-14);
    }
}

#[test]
fn verify_reports_small_ode_residual() {
    let out = qbridge()
        .args(["verify", "--q", "0.5", "--lambda", "1", "--h", "identity"])
        .assert()
        .success()
        .get_output()
        .stdout
        .clone();
    let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["passed"], true);
    let checks = v["checks"].as_array().unwrap();
    let ode = checks
        .iter()
        .find(|c| c["name"] == "ode_residual_analytic_slope")
        .unwrap();
    assert!(ode["value"].as_f64().unwrap() < 1e-10);
}

#[test]
fn failed_verification_exits_4() {
    qbridge()
        .args(["verify", "--q", "1.5", "--lambda", "1", "--h", "square", "--grid", "-2:2:9"])
        .assert()
        .code(4)
        .stderr(contains("transport_max_residual"));
}

#[test]
fn singular_index_exits_3() {
    qbridge()
        .args(["transform", "--q", "2.0", "--lambda", "1", "--h", "identity"])
        .assert()
        .code(3)
        .stderr(contains("q = 2"));
}

#[test]
fn bad_configuration_exits_2() {
    qbridge().args(["transform", "--lambda", "1", "--h", "identity"]).assert().code(2);
    qbridge()
        .args(["transform", "--q", "0.5", "--lambda", "1", "--h", "cube"])
        .assert()
        .code(2);
    qbridge()
        .args(["transform", "--q", "0.5", "--lambda", "1", "--h", "identity", "--grid", "3:1:4"])
        .assert()
        .code(2);
}

#[test]
fn heavy_tail_is_a_solver_failure() {
    qbridge()
        .args(["transform", "--q", "1.9", "--lambda", "1", "--h", "identity"])
        .assert()
        .code(5);
}

#[test]
fn output_is_deterministic() {
    let run = || {
        qbridge()
            .args(["sample", "--q", "0.5", "--lambda", "1", "--h", "identity", "--n", "2000", "--seed", "11"])
            .assert()
            .success()
            .get_output()
            .stdout
            .clone()
    };
    assert_eq!(run(), run());
}

#[test]
fn failed_run_leaves_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.csv");
    qbridge()
        .args(["transform", "--q", "2.0", "--lambda", "1", "--h", "identity", "-o"])
        .arg(&path)
        .assert()
        .code(3);
    assert!(!path.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);

    qbridge()
        .args(["transform", "--q", "0.5", "--lambda", "1", "--h", "identity", "--grid", "0:1:3", "-o"])
        .arg(&path)
        .assert()
        .success()
        .stdout("");
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 4);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"q": 0.5, "lambdas": [1.0], "h": ["identity"], "grid": "0:1:5", "format": "json"}"#,
    )
    .unwrap();
    let out = qbridge()
        .args(["transform", "--q", "1.5", "--config"])
        .arg(&cfg)
        .assert()
        .success()
        .get_output()
        .stdout
        .clone();
    let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["q"], 1.5);
    assert_eq!(v["rows"].as_array().unwrap().len(), 5);
}

#[test]
fn grid_is_clipped_to_the_support() {
    let out = qbridge()
        .args(["transform", "--q", "0.5", "--lambda", "1", "--h", "identity", "--grid", "0:4:5"])
        .assert()
        .success()
        .stderr(contains("warning"))
        .get_output()
        .stdout
        .clone();
    let rows = csv_rows(&out);
    assert!(rows.iter().all(|r| r[0] <= 2.0));
}

#[test]
fn averages_ratio() {
    let out = qbridge()
        .args(["averages", "--q", "0.5", "--lambda", "1", "--h", "identity"])
        .assert()
        .success()
        .get_output()
        .stdout
        .clone();
    let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
    let ct = v["ct"].as_f64().unwrap();
    let xq = v["x_q"].as_f64().unwrap();
    let tmp = v["tmp"].as_f64().unwrap();
    assert!((tmp - ct / xq).abs() < 1e-12);
}
