use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_psi-hilfer"))
}

fn run_with(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let path = dir.join("config.json");
    std::fs::write(&path, config).unwrap();
    bin()
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn error_record(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().rev().find(|l| l.starts_with('{')).expect("JSON record on stderr");
    serde_json::from_str(line).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|s| s.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

const CAPUTO: &str = r#"{
  "command": "solve",
  "problem": {"f": "1", "g": "y", "y0": 1, "T": 1, "psi": "identity", "mu": 0.5, "nu": 1},
  "solver": {"N": 512}
}"#;

#[test]
fn solve_caputo_problem_writes_curve_and_report() {
    let dir = TempDir::new().unwrap();
    let out = run_with(dir.path(), CAPUTO, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("out/solution.csv"));
    assert_eq!(header, ["t", "psi_increment", "weighted_value", "unweighted_value"]);
    let last = rows.last().unwrap();
    assert_eq!(last[0], 1.0);
    // E_{1/2}(1)
    let exact = 5.008_980_080_762_283;
    assert!(((last[3] - exact) / exact).abs() < 1e-3, "y(1) = {}", last[3]);
    assert_eq!(rows[0][2], 1.0);

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["solver"]["converged"], true);
    assert!(report["solver"]["existence_value"].is_number());
}

#[test]
fn order_out_of_range_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let out = run_with(dir.path(), CAPUTO, &["--mu", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    let rec = error_record(&out);
    assert_eq!(rec["error"]["kind"], "validation");
    assert!(rec["error"]["message"].as_str().unwrap().contains("mu must be in (0,1)"));
}

#[test]
fn vanishing_f_fails_the_hypothesis() {
    let dir = TempDir::new().unwrap();
    let out = run_with(dir.path(), CAPUTO, &["--f", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["error"]["kind"], "hypothesis");
}

#[test]
fn malformed_json_reports_location() {
    let dir = TempDir::new().unwrap();
    let out = run_with(dir.path(), "{\n  \"command\": \"solve\",\n  \"problem\": {\"mu\": }\n}", &[]);
    assert_eq!(out.status.code(), Some(2));
    let rec = error_record(&out);
    assert_eq!(rec["error"]["kind"], "config_syntax");
    assert_eq!(rec["error"]["line"], 3);
}

#[test]
fn malformed_expression_reports_field_and_offset() {
    let dir = TempDir::new().unwrap();
    let out = run_with(dir.path(), CAPUTO, &["--g", "y * (t"]);
    assert_eq!(out.status.code(), Some(2));
    let rec = error_record(&out);
    assert_eq!(rec["error"]["kind"], "parse");
    assert_eq!(rec["error"]["field"], "problem.g");
    assert!(rec["error"]["offset"].is_number());
}

#[test]
fn integrate_zero_gives_zeros() {
    let dir = TempDir::new().unwrap();
    let config = r#"{"command": "integrate", "problem": {"mu": 0.4, "nu": 0.5, "psi": "power:2"},
                     "operator": {"h": "0"}, "solver": {"N": 64}}"#;
    let out = run_with(dir.path(), config, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("out/integral.csv"));
    assert_eq!(header.last().unwrap(), "integral");
    assert_eq!(rows.len(), 65);
    assert!(rows.iter().all(|r| r[4] == 0.0));
}

#[test]
fn derive_constant_in_caputo_case_is_zero() {
    let dir = TempDir::new().unwrap();
    let config = r#"{"command": "derive", "problem": {"mu": 0.3, "nu": 1},
                     "operator": {"h": "2"}, "solver": {"N": 64}}"#;
    let out = run_with(dir.path(), config, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = read_csv(&dir.path().join("out/derivative.csv"));
    assert!(rows.iter().all(|r| r[4].abs() < 1e-12));
}

#[test]
fn verify_ml_identity_caputo_sweep_passes() {
    let dir = TempDir::new().unwrap();
    let config = r#"{"command": "verify", "problem": {"mu": 0.5, "nu": 1},
                     "verify": {"check": "ml-identity", "L": 0.5}, "solver": {"N": 1024}}"#;
    let out = run_with(dir.path(), config, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], true);
    assert!(summary["details"]["sweep"]["max_rel_err"].as_f64().unwrap() < 1e-3);
}

#[test]
fn verify_touchpoint_default_function_passes() {
    let dir = TempDir::new().unwrap();
    let config = r#"{"command": "verify", "problem": {"mu": 0.6, "nu": 0.2, "psi": "shifted-log"},
                     "verify": {"check": "touchpoint", "touch_t": 0.7}, "solver": {"N": 256}}"#;
    let out = run_with(dir.path(), config, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn verify_comparison_on_linear_problem_passes() {
    let dir = TempDir::new().unwrap();
    let config = r#"{"command": "verify",
                     "problem": {"f": "1", "g": "0.5*cos(t) - 0.2*y", "y0": 0.4, "mu": 0.6, "nu": 1},
                     "verify": {"check": "comparison", "L": 0.2}, "solver": {"N": 256}}"#;
    let out = run_with(dir.path(), config, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn extremal_ladder_brackets_the_solution() {
    let dir = TempDir::new().unwrap();
    let config = r#"{"command": "extremal",
                     "problem": {"f": "2 + 0.1*sin(y)", "g": "0.5*cos(t) - 0.2*y", "y0": 0.4, "mu": 0.6, "nu": 0.3},
                     "extremal": {"max_levels": 5}, "solver": {"N": 128}}"#;
    let out = run_with(dir.path(), config, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["sandwich"]["passed"], true);
    assert!(dir.path().join("out/maximal_level_04.csv").exists());
}

#[test]
fn probe_uniqueness_reports_consistency() {
    let dir = TempDir::new().unwrap();
    let config = r#"{"command": "probe-uniqueness",
                     "problem": {"f": "1", "g": "1 - 0.5*sin(y)", "y0": 0.5, "mu": 0.4, "nu": 1},
                     "uniqueness": {"G": "0.5*m", "starts": [0, 2, -1]}, "solver": {"N": 128}}"#;
    let out = run_with(dir.path(), config, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["uniqueness"]["verdict"], "consistent");
}

#[test]
fn identical_configs_give_identical_bytes() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for dir in [&a, &b] {
        let out = run_with(dir.path(), CAPUTO, &["--mesh-n", "128"]);
        assert_eq!(out.status.code(), Some(0));
    }
    for name in ["solution.csv", "report.json", "resolved_config.json"] {
        let x = std::fs::read(a.path().join("out").join(name)).unwrap();
        let y = std::fs::read(b.path().join("out").join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
}

#[test]
fn flags_alone_are_enough() {
    let dir = TempDir::new().unwrap();
    let out = bin()
        .args(["--command", "solve", "--f", "1", "--g", "1", "--y0", "0", "--mu", "0.5", "--nu", "1"])
        .args(["--mesh-n", "64", "--psi", "custom:t + t*t,1 + 2*t", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let resolved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("resolved_config.json")).unwrap()).unwrap();
    assert_eq!(resolved["problem"]["psi"], "custom:t + t*t,1 + 2*t");
}
