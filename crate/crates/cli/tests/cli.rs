use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_simrenew");

const SMALL: &str = r#"{
    "version": 1,
    "name": "small",
    "chains": [
        {"kind": "birth_death", "tail": {"kind": "constant", "alphas": 0.75}, "cap": 8},
        {"kind": "birth_death", "tail": {"kind": "periodic", "alphas": [0.75, 0.8]}, "cap": 8}
    ],
    "initial": [0, 3],
    "horizon": 2000,
    "n_paths": 5000,
    "seed": 11,
    "domination": {"kind": "random_walk", "p": 0.75, "n_terms": 500},
    "condition_check": {"n_paths": 2000, "horizon": 100},
    "report": {"condition_a_paths": 2000}
}"#;

fn simrenew(dir: &Path, config: Option<&str>, args: &[&str]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).arg("--out-dir").arg(dir.join("out"));
    if let Some(text) = config {
        let path = dir.join("scenario.json");
        fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

fn report(dir: &Path, stem: &str) -> Value {
    let text = fs::read_to_string(dir.join("out").join(format!("{stem}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn malformed_config_exits_3_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let o = simrenew(
        dir.path(),
        Some("{\n  \"version\": 1,\n  \"name\": ,\n}"),
        &["simulate"],
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn missing_config_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = simrenew(dir.path(), None, &["bound"]);
    assert_eq!(o.status.code(), Some(3));
    let o = Command::new(BIN)
        .args(["simulate", "--config", "/nonexistent/scenario.json"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn p_one_half_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMALL.replace("\"p\": 0.75", "\"p\": 0.5");
    for sub in ["validate", "bound"] {
        let o = simrenew(dir.path(), Some(&cfg), &[sub]);
        assert_eq!(o.status.code(), Some(1), "{sub}: {}", stderr(&o));
        assert!(stderr(&o).contains("(1/2, 1)"), "{}", stderr(&o));
    }
}

#[test]
fn invalid_rows_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMALL.replace(
        r#"{"kind": "birth_death", "tail": {"kind": "constant", "alphas": 0.75}, "cap": 8}"#,
        r#"{"kind": "explicit", "states": 2, "tail": {"kind": "constant", "matrices": [[0.6, 0.5], [0.5, 0.5]]}}"#,
    );
    let o = simrenew(dir.path(), Some(&cfg), &["validate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("row 0 sums to 1.1"), "{}", stderr(&o));
    assert_eq!(
        report(dir.path(), "small-validate")["result"]["valid"],
        false
    );
}

#[test]
fn simulate_writes_documented_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = simrenew(
        dir.path(),
        Some(SMALL),
        &["simulate", "--format", "csv", "--workers", "2"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("out/small-simulate-paths.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("path_id,T,theta0_1,theta0_2,tau_trials,censored")
    );
    assert_eq!(lines.count(), 5000);
    let r = report(dir.path(), "small-simulate");
    assert_eq!(r["result"]["mean"]["provenance"], "mc");
    assert!(r["result"]["mean"]["se"].as_f64().unwrap() > 0.0);
    assert_eq!(r["config"]["name"], "small");
}

#[test]
fn reports_are_identical_across_worker_counts() {
    for sub in ["simulate", "bound", "condition-check", "exact"] {
        let mut reports = Vec::new();
        for workers in ["1", "4"] {
            let dir = tempfile::tempdir().unwrap();
            let o = simrenew(dir.path(), Some(SMALL), &[sub, "--workers", workers]);
            assert_eq!(o.status.code(), Some(0), "{sub}: {}", stderr(&o));
            let mut r = report(dir.path(), &format!("small-{sub}"));
            r.as_object_mut().unwrap().remove("generated_at_unix");
            reports.push(serde_json::to_string(&r).unwrap());
        }
        assert_eq!(reports[0], reports[1], "{sub}");
    }
}

#[test]
fn reproduce_builtin_reports_e2_below_e1() {
    let dir = tempfile::tempdir().unwrap();
    let o = simrenew(dir.path(), None, &["reproduce-sec3", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(dir.path(), "birth-death-0.75-reproduce-sec3");
    let s = &r["result"]["summary"];
    assert_eq!(s["verdict"], "e2_tighter");
    assert!(s["e2"].as_f64().unwrap() < s["e1"].as_f64().unwrap());
    assert_eq!(s["mc_et"]["provenance"], "mc");
    assert!(dir
        .path()
        .join("out/birth-death-0.75-reproduce-sec3-s_hat.csv")
        .exists());
}
