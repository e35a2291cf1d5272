use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::config::{Method, Rule};
use super::run::{check_records, RunRecord};
use crate::error::{Error, Result};
use crate::linalg::fit_line;

pub const CSV_HEADER: [&str; 8] = ["delta", "alpha_or_N", "error", "residual", "rule", "method", "seed", "wall_ms"];

/// 17 significant digits in scientific notation.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn io(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

/// Serializes records to CSV text. Discrepancy records are re-checked
/// against `τδ` first.
pub fn csv_string(records: &[RunRecord], tau: f64) -> Result<String> {
    check_records(records, tau)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        w.write_record([
            format_float(r.delta),
            format_float(r.alpha_or_n),
            format_float(r.error),
            format_float(r.residual),
            r.rule.as_str().to_string(),
            r.method.as_str().to_string(),
            r.seed.to_string(),
            format_float(r.wall_ms),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(io)?;
    String::from_utf8(bytes).map_err(io)
}

pub fn write_csv(path: &Path, records: &[RunRecord], tau: f64) -> Result<()> {
    let text = csv_string(records, tau)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Reads records written by [`csv_string`]. The realization index is not
/// stored and comes back as the row's position within its `δ` block.
pub fn parse_csv(text: &str) -> Result<Vec<RunRecord>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(io)?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Input(format!("unexpected CSV header: {}", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut out: Vec<RunRecord> = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(io)?;
        let bad = |what: &str| Error::Input(format!("row {}: bad {what}", line + 2));
        let num = |i: usize, what: &str| row[i].parse::<f64>().map_err(|_| bad(what));
        let delta = num(0, "delta")?;
        let realization = out.iter().rev().take_while(|r| r.delta == delta).count();
        out.push(RunRecord {
            delta,
            alpha_or_n: num(1, "alpha_or_N")?,
            error: num(2, "error")?,
            residual: num(3, "residual")?,
            rule: Rule::parse(&row[4]).ok_or_else(|| bad("rule"))?,
            method: Method::parse(&row[5]).ok_or_else(|| bad("method"))?,
            seed: row[6].parse().map_err(|_| bad("seed"))?,
            realization,
            wall_ms: num(7, "wall_ms")?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregate {
    Median,
    Mean,
}

pub fn aggregate(values: &mut [f64], how: Aggregate) -> f64 {
    match how {
        Aggregate::Mean => values.iter().sum::<f64>() / values.len() as f64,
        Aggregate::Median => {
            values.sort_by(f64::total_cmp);
            let m = values.len() / 2;
            if values.len() % 2 == 1 {
                values[m]
            } else {
                0.5 * (values[m - 1] + values[m])
            }
        }
    }
}

/// Least-squares line through `(ln δ, ln aggregate error)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    /// `(δ, aggregated error)` in decreasing `δ`.
    pub points: Vec<(f64, f64)>,
}

/// Aggregates errors per distinct `δ`, in decreasing `δ`.
pub fn aggregate_by_delta(records: &[RunRecord], how: Aggregate) -> Vec<(f64, f64)> {
    let mut groups: Vec<(f64, Vec<f64>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(d, _)| *d == r.delta) {
            Some((_, v)) => v.push(r.error),
            None => groups.push((r.delta, vec![r.error])),
        }
    }
    groups.sort_by(|a, b| b.0.total_cmp(&a.0));
    groups
        .into_iter()
        .map(|(d, mut v)| (d, aggregate(&mut v, how)))
        .collect()
}

pub fn fit_rate(records: &[RunRecord], how: Aggregate) -> Result<RateFit> {
    fit_rate_points(&aggregate_by_delta(records, how))
}

/// Fits already aggregated `(δ, error)` pairs.
pub fn fit_rate_points(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::Parameter(format!(
            "rate fit needs at least 3 distinct noise levels, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(d, e)| !(d > 0.0 && e > 0.0 && d.is_finite() && e.is_finite())) {
        return Err(Error::Parameter("rate fit needs positive finite noise levels and errors".into()));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept, residual) = fit_line(&x, &y);
    Ok(RateFit {
        slope,
        intercept,
        residual,
        points: points.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupBy {
    Method,
    Rule,
    MethodRule,
}

pub fn group_key(r: &RunRecord, by: GroupBy) -> String {
    match by {
        GroupBy::Method => r.method.as_str().to_string(),
        GroupBy::Rule => r.rule.as_str().to_string(),
        GroupBy::MethodRule => format!("{}_{}", r.method.as_str(), r.rule.as_str()),
    }
}

pub fn group_records(records: &[RunRecord], by: GroupBy) -> BTreeMap<String, Vec<RunRecord>> {
    let mut out: BTreeMap<String, Vec<RunRecord>> = BTreeMap::new();
    for r in records {
        out.entry(group_key(r, by)).or_default().push(r.clone());
    }
    out
}

/// Writes one `log10 δ  log10 error` file per (method, rule) into `dir`,
/// named `<stem>_<method>_<rule>.dat`.
pub fn write_plot_data(dir: &Path, stem: &str, records: &[RunRecord], how: Aggregate) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut written = Vec::new();
    for (key, group) in group_records(records, GroupBy::MethodRule) {
        let mut text = String::new();
        for (d, e) in aggregate_by_delta(&group, how) {
            text.push_str(&format!("{} {}\n", format_float(d.log10()), format_float(e.log10())));
        }
        let path = dir.join(format!("{stem}_{key}.dat"));
        std::fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(delta: f64, error: f64) -> RunRecord {
        RunRecord {
            delta,
            alpha_or_n: 1.0,
            error,
            residual: delta,
            rule: Rule::Apriori,
            method: Method::Tikhonov,
            seed: 1,
            realization: 0,
            wall_ms: 0.0,
        }
    }

    fn sweep(f: impl Fn(f64) -> f64) -> Vec<RunRecord> {
        (0..6).map(|i| 10f64.powf(-1.0 - 0.5 * i as f64)).map(|d| record(d, f(d))).collect()
    }

    #[test]
    fn exact_square_root_rate() {
        let fit = fit_rate(&sweep(|d| d.sqrt()), Aggregate::Median).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-12);
    }

    #[test]
    fn quadratic_rate_with_constant() {
        let fit = fit_rate(&sweep(|d| 3.0 * d * d), Aggregate::Median).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn needs_three_levels() {
        let recs = vec![record(0.1, 0.1), record(0.01, 0.01), record(0.01, 0.02)];
        assert!(matches!(fit_rate(&recs, Aggregate::Median), Err(Error::Parameter(_))));
    }

    #[test]
    fn median_ignores_outliers() {
        let mut recs = sweep(|d| d);
        recs.extend(sweep(|d| d));
        recs.extend(sweep(|_| 1e6));
        let fit = fit_rate(&recs, Aggregate::Median).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        let mean = fit_rate(&recs, Aggregate::Mean).unwrap();
        assert!(mean.slope.abs() < 0.1);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let recs = vec![record(0.1, 1.0 / 3.0), record(0.1, 2f64.sqrt()), record(1e-5, 7e-300)];
        let text = csv_string(&recs, 1.5).unwrap();
        assert!(text.starts_with("delta,alpha_or_N,error,residual,rule,method,seed,wall_ms\n"));
        assert!(text.contains("3.3333333333333331e-1"));
        let back = parse_csv(&text).unwrap();
        assert_eq!(back[1].realization, 1);
        assert_eq!(back[2].realization, 0);
        for (a, b) in recs.iter().zip(&back) {
            assert_eq!(a.error, b.error);
            assert_eq!(a.delta, b.delta);
        }
    }

    #[test]
    fn discrepancy_violation_blocks_writing() {
        let mut r = record(0.1, 1.0);
        r.rule = Rule::Morozov;
        r.residual = 0.2;
        assert!(matches!(csv_string(&[r], 1.5), Err(Error::Internal(_))));
    }
}
