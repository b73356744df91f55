//! CSV artifacts and plain-text results tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::aggregate::{report_rows, table_values, AggregateRow};
use super::cooccurrence::{Level, Matrix};
use super::metrics::RunMetrics;
use crate::annotation::Characteristic;
use crate::classifier::Task;
use crate::error::{Error, Result};
use crate::normalize::ContextMode;

pub fn metrics_file_name(task: Task, mode: ContextMode) -> String {
    format!("metrics_{}_{}.csv", task.as_str(), mode.as_str())
}

pub fn cooccurrence_file_name(level: Level) -> String {
    format!("cooccurrence_{}.csv", level.as_str())
}

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

/// One row per run: `seed,<metric>...` in table order.
pub fn write_metrics_csv(path: impl AsRef<Path>, task: Task, runs: &[RunMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["seed".to_string()];
    header.extend(report_rows(task).iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for m in runs {
        let mut row = vec![m.seed.to_string()];
        row.extend(table_values(m, task)?.into_iter().map(|(_, v)| fmt(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One metrics CSV row: the seed and `(metric, value)` pairs in column order.
pub type MetricsRow = (u64, Vec<(String, f64)>);

/// Inverse of [`write_metrics_csv`] for the table values.
pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let bad = |what: &str| Error::Validation(format!("{}: bad {what}", path.as_ref().display()));
        let seed = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| bad("seed"))?;
        let mut values = Vec::new();
        for (name, cell) in header.iter().zip(rec.iter()).skip(1) {
            values.push((name.clone(), cell.parse::<f64>().map_err(|_| bad(name))?));
        }
        out.push((seed, values));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateEntry {
    pub task: Task,
    pub mode: ContextMode,
    pub rows: Vec<AggregateRow>,
}

pub fn write_aggregate_csv(path: impl AsRef<Path>, entries: &[AggregateEntry]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["task", "mode", "metric", "mean", "std", "runs"])?;
    for e in entries {
        for r in &e.rows {
            w.write_record([
                e.task.as_str(),
                e.mode.as_str(),
                &r.metric,
                &fmt(r.mean),
                &r.std.map(fmt).unwrap_or_default(),
                &r.runs.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_aggregate_csv(path: impl AsRef<Path>) -> Result<Vec<AggregateEntry>> {
    #[derive(Deserialize)]
    struct Row {
        task: String,
        mode: String,
        metric: String,
        mean: f64,
        std: Option<f64>,
        runs: usize,
    }
    let mut grouped: Vec<AggregateEntry> = Vec::new();
    for row in csv::Reader::from_path(path)?.deserialize::<Row>() {
        let row = row?;
        let task: Task = row.task.parse()?;
        let mode: ContextMode = row.mode.parse()?;
        let entry = match grouped.iter_mut().find(|e| e.task == task && e.mode == mode) {
            Some(e) => e,
            None => {
                grouped.push(AggregateEntry {
                    task,
                    mode,
                    rows: Vec::new(),
                });
                grouped.last_mut().unwrap()
            }
        };
        entry.rows.push(AggregateRow {
            metric: row.metric,
            mean: row.mean,
            std: row.std,
            runs: row.runs,
        });
    }
    Ok(grouped)
}

/// Text table with one column per context mode, `mean ± std` cells.
pub fn render_table(task: Task, entries: &[AggregateEntry]) -> String {
    let cols: Vec<&AggregateEntry> = ContextMode::ALL
        .iter()
        .filter_map(|m| entries.iter().find(|e| e.task == task && e.mode == *m))
        .collect();
    let cell = |e: &AggregateEntry, metric: &str| {
        e.rows
            .iter()
            .find(|r| r.metric == metric)
            .map(|r| match r.std {
                Some(s) => format!("{:.1} ± {:.1}", r.mean, s),
                None => format!("{:.1}", r.mean),
            })
            .unwrap_or_else(|| "-".into())
    };
    let mut out = String::new();
    let _ = write!(out, "{:<16}", task.as_str());
    for e in &cols {
        let _ = write!(out, "{:>14}", e.mode.label());
    }
    out.push('\n');
    for metric in report_rows(task) {
        let _ = write!(out, "{metric:<16}");
        for e in &cols {
            let _ = write!(out, "{:>14}", cell(e, metric));
        }
        out.push('\n');
    }
    out
}

pub fn write_cooccurrence_csv(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![""];
    header.extend(Characteristic::ALL.iter().map(|c| c.as_str()));
    w.write_record(&header)?;
    for c in Characteristic::ALL {
        let mut row = vec![c.as_str().to_string()];
        row.extend(m[c.index()].iter().map(usize::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Every metrics CSV below `dir`, keyed by file name.
pub fn find_metrics_files(dir: impl AsRef<Path>) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
            if name.starts_with("metrics_") && name.ends_with(".csv") {
                out.insert(name.to_string(), path.clone());
            }
        }
    }
    Ok(out)
}
