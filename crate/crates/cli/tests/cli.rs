use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_illposed");

const BASE: &str = r#"{
    "problem": {"name": "integration", "n": 64},
    "truth": {"nu": 2.0, "rho": 1.0},
    "method": "tikhonov",
    "rule": "apriori",
    "delta_grid": {"start": 0.01, "factor": 0.1, "count": 3},
    "seeds": {"master": 7, "realizations": 2},
    "output": "out.csv"
}"#;

fn run_config(dir: &Path, text: &str) -> Output {
    let config = dir.join("config.json");
    std::fs::write(&config, text).unwrap();
    Command::new(BIN)
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir)
        .output()
        .unwrap()
}

#[test]
fn run_writes_csv_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(dir.path(), BASE);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("delta,alpha_or_N,error,residual,rule,method,seed,wall_ms"));
    assert_eq!(lines.count(), 6);
    let plot = std::fs::read_to_string(dir.path().join("out_tikhonov_apriori.dat")).unwrap();
    assert_eq!(plot.lines().count(), 3);
    assert!(plot.lines().all(|l| l.split_whitespace().count() == 2));
}

#[test]
fn rates_reports_a_slope_per_group() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_config(dir.path(), BASE).status.success());
    let out = Command::new(BIN)
        .args(["rates", "--csv"])
        .arg(dir.path().join("out.csv"))
        .args(["--group", "method"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row = text.lines().find(|l| l.starts_with("tikhonov")).expect("tikhonov row");
    let slope: f64 = row.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(slope > 0.3 && slope < 1.0, "{slope}");
}

#[test]
fn invalid_config_exits_with_2_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(dir.path(), &BASE.replace("\"factor\": 0.1", "\"factor\": 1.5"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("delta_grid.factor"));

    let out = run_config(dir.path(), &BASE.replace("\"rule\"", "\"rulez\": 0, \"rule\""));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rulez"));
}

#[test]
fn method_failure_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = BASE
        .replace("\"tikhonov\"", "\"landweber\"")
        .replace("\"apriori\"", "\"morozov\"")
        .replace("\"seeds\"", "\"options\": {\"max_iter\": 2}, \"seeds\"");
    let out = run_config(dir.path(), &text);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_config_is_a_config_error() {
    let out = Command::new(BIN)
        .args(["run", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
