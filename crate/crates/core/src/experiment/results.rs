//! CSV result files.
//!
//! Per-seed files hold `seed,step,metric,value`; `aggregate.csv` holds
//! `step,metric,mean,std,count` with the population std across seeds.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::RunRecord;

pub const SEED_HEADER: &str = "seed,step,metric,value";
pub const AGGREGATE_HEADER: &str = "step,metric,mean,std,count";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub seed: u64,
    pub step: u64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub step: u64,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

pub fn rows_from_records(seed: u64, records: &[RunRecord]) -> Vec<ResultRow> {
    records
        .iter()
        .flat_map(|r| {
            r.metrics().into_iter().map(move |(metric, value)| ResultRow { seed, step: r.step, metric, value })
        })
        .collect()
}

pub fn seed_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(SEED_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.seed, r.step, r.metric, r.value);
    }
    out
}

fn bad_line(path: &Path, line: usize, msg: &str) -> Error {
    Error::Numeric(format!("{}:{}: {msg}", path.display(), line + 1))
}

fn read_lines(path: &Path, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == header => {}
        _ => return Err(bad_line(path, 0, &format!("expected header `{header}`"))),
    }
    Ok(lines.filter(|(_, l)| !l.is_empty()).map(|(i, l)| (i, l.split(',').map(str::to_string).collect())).collect())
}

pub fn read_seed_csv(path: &Path) -> Result<Vec<ResultRow>> {
    read_lines(path, SEED_HEADER)?
        .into_iter()
        .map(|(i, f)| {
            if f.len() != 4 {
                return Err(bad_line(path, i, "expected 4 fields"));
            }
            Ok(ResultRow {
                seed: f[0].parse().map_err(|_| bad_line(path, i, "bad seed"))?,
                step: f[1].parse().map_err(|_| bad_line(path, i, "bad step"))?,
                metric: f[2].clone(),
                value: f[3].parse().map_err(|_| bad_line(path, i, "bad value"))?,
            })
        })
        .collect()
}

/// Mean and population std per `(step, metric)`, ordered by step then by
/// first appearance of the metric.
pub fn aggregate(rows: &[ResultRow]) -> Vec<AggregateRow> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<(u64, usize), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let m = match order.iter().position(|m| *m == r.metric) {
            Some(i) => i,
            None => {
                order.push(r.metric.clone());
                order.len() - 1
            }
        };
        groups.entry((r.step, m)).or_default().push(r.value);
    }
    groups
        .into_iter()
        .map(|((step, m), vals)| {
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            AggregateRow { step, metric: order[m].clone(), mean, std: var.sqrt(), count: vals.len() }
        })
        .collect()
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.step, r.metric, r.mean, r.std, r.count);
    }
    out
}

pub fn read_aggregate_csv(path: &Path) -> Result<Vec<AggregateRow>> {
    read_lines(path, AGGREGATE_HEADER)?
        .into_iter()
        .map(|(i, f)| {
            if f.len() != 5 {
                return Err(bad_line(path, i, "expected 5 fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad_line(path, i, "bad number"));
            Ok(AggregateRow {
                step: f[0].parse().map_err(|_| bad_line(path, i, "bad step"))?,
                metric: f[1].clone(),
                mean: num(&f[2])?,
                std: num(&f[3])?,
                count: f[4].parse().map_err(|_| bad_line(path, i, "bad count"))?,
            })
        })
        .collect()
}

/// `(step, mean, std)` for one metric.
pub fn series(rows: &[AggregateRow], metric: &str) -> Vec<(u64, f64, f64)> {
    rows.iter().filter(|r| r.metric == metric).map(|r| (r.step, r.mean, r.std)).collect()
}

/// Mean of `metric` over steps `<= until`, per seed.
pub fn early_mean_per_seed(rows: &[ResultRow], metric: &str, until: u64) -> BTreeMap<u64, f64> {
    let mut acc: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.metric == metric && r.step <= until) {
        let e = acc.entry(r.seed).or_default();
        e.0 += r.value;
        e.1 += 1;
    }
    acc.into_iter().map(|(s, (sum, n))| (s, sum / n as f64)).collect()
}

/// Value of `metric` at the last recorded step, per seed.
pub fn final_per_seed(rows: &[ResultRow], metric: &str) -> BTreeMap<u64, f64> {
    let mut out: BTreeMap<u64, (u64, f64)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.metric == metric) {
        let e = out.entry(r.seed).or_insert((r.step, r.value));
        if r.step >= e.0 {
            *e = (r.step, r.value);
        }
    }
    out.into_iter().map(|(s, (_, v))| (s, v)).collect()
}
