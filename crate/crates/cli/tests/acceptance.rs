//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! `cargo test -p illposed-cli --test acceptance -- 3 7` runs a subset.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use illposed_core::acceptance::{self, Check, CriterionReport};

const BIN: &str = env!("CARGO_BIN_EXE_illposed");

const CONFIG: &str = r#"{
    "problem": {"name": "integration", "n": 128},
    "truth": {"nu": 1.0, "rho": 1.0},
    "method": "tikhonov",
    "rule": "morozov",
    "delta_grid": {"start": 0.01, "factor": 0.1, "count": 3},
    "seeds": {"master": 11, "realizations": 3},
    "output": "results.csv"
}"#;

fn run_once(config: &Path, out: &Path, threads: usize) -> Result<Vec<u8>, String> {
    let status = Command::new(BIN)
        .args(["run", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--threads", &threads.to_string()])
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    std::fs::read(out.join("results.csv")).map_err(|e| e.to_string())
}

fn criterion_11() -> CriterionReport {
    let start = Instant::now();
    let mut checks = Vec::new();
    let dir = tempfile::tempdir().expect("temp dir");
    let config = dir.path().join("config.json");
    std::fs::write(&config, CONFIG).expect("write config");

    let first = run_once(&config, &dir.path().join("a"), 1);
    let second = run_once(&config, &dir.path().join("b"), 4);
    let (passed, detail) = match (&first, &second) {
        (Ok(a), Ok(b)) => (a == b && !a.is_empty(), format!("{} and {} bytes, equal: {}", a.len(), b.len(), a == b)),
        (Err(e), _) | (_, Err(e)) => (false, e.trim().to_string()),
    };
    checks.push(Check {
        label: "two runs produce identical CSV bytes".into(),
        passed,
        detail,
    });

    let t = Instant::now();
    let selftest = Command::new(BIN).arg("selftest").output();
    let secs = t.elapsed().as_secs_f64();
    let (passed, detail) = match selftest {
        Ok(o) => (
            o.status.success() && secs < 90.0,
            format!("exit {:?} after {secs:.1} s", o.status.code()),
        ),
        Err(e) => (false, e.to_string()),
    };
    checks.push(Check {
        label: "selftest exits 0 in under 90 s".into(),
        passed,
        detail,
    });

    CriterionReport {
        id: 11,
        title: "CLI determinism",
        checks,
        elapsed: start.elapsed(),
        budget: Duration::from_secs(120),
    }
}

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let all: Vec<(u32, fn() -> CriterionReport)> = vec![
        (1, acceptance::criterion_1),
        (2, acceptance::criterion_2),
        (3, acceptance::criterion_3),
        (4, acceptance::criterion_4),
        (5, acceptance::criterion_5),
        (6, acceptance::criterion_6),
        (7, acceptance::criterion_7),
        (8, acceptance::criterion_8),
        (9, acceptance::criterion_9),
        (10, acceptance::criterion_10),
        (11, criterion_11),
    ];
    let mut failed = 0;
    for (id, f) in all {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let report = f();
        println!("{}", report.summary_line());
        if !report.passed() {
            print!("{}", report.details());
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
