//! Mean ± sample standard deviation across runs, in report row order.

use serde::{Deserialize, Serialize};

use super::metrics::{RunMetrics, HATEFUL};
use crate::classifier::Task;
use crate::error::{Error, Result};

pub const BINARY_ROWS: [&str; 4] = ["Precision", "Recall", "F1", "Macro F1"];

pub const FINEGRAINED_ROWS: [&str; 12] = [
    "CALLS",
    "POLITICS",
    "APPEARANCE",
    "DISABLED",
    "WOMEN",
    "RACISM",
    "CLASS",
    "LGBTI",
    "CRIMINAL",
    "Macro F1",
    "Macro Precision",
    "Macro Recall",
];

pub fn report_rows(task: Task) -> &'static [&'static str] {
    match task {
        Task::Binary => &BINARY_ROWS,
        Task::FineGrained => &FINEGRAINED_ROWS,
    }
}

/// The values shown in a results table for one run, in row order.
pub fn table_values(m: &RunMetrics, task: Task) -> Result<Vec<(&'static str, f64)>> {
    let missing = |l: &str| Error::Validation(format!("run for seed {} lacks label {l}", m.seed));
    let values = match task {
        Task::Binary => {
            let pos = m.label(HATEFUL).ok_or_else(|| missing(HATEFUL))?;
            vec![
                ("Precision", pos.precision),
                ("Recall", pos.recall),
                ("F1", pos.f1),
                ("Macro F1", m.macro_f1),
            ]
        }
        Task::FineGrained => {
            let mut rows = Vec::with_capacity(FINEGRAINED_ROWS.len());
            for name in &FINEGRAINED_ROWS[..9] {
                rows.push((*name, m.label(name).ok_or_else(|| missing(name))?.f1));
            }
            rows.push(("Macro F1", m.macro_f1));
            rows.push(("Macro Precision", m.macro_precision));
            rows.push(("Macro Recall", m.macro_recall));
            rows
        }
    };
    Ok(values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub metric: String,
    pub mean: f64,
    /// Absent for a single run.
    pub std: Option<f64>,
    pub runs: usize,
}

pub fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.len() > 1).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1.0)).sqrt()
    });
    (mean, std)
}

pub fn aggregate_runs(runs: &[RunMetrics], task: Task) -> Result<Vec<AggregateRow>> {
    if runs.is_empty() {
        return Err(Error::InsufficientData("no runs to aggregate".into()));
    }
    if runs.len() == 1 {
        log::warn!("aggregating a single run; standard deviation omitted");
    }
    let tables = runs.iter().map(|m| table_values(m, task)).collect::<Result<Vec<_>>>()?;
    Ok(report_rows(task)
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let values: Vec<f64> = tables.iter().map(|t| t[i].1).collect();
            let (mean, std) = mean_std(&values);
            AggregateRow {
                metric: name.to_string(),
                mean,
                std,
                runs: runs.len(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::binary_metrics;

    #[test]
    fn closed_form_std() {
        let (m, s) = mean_std(&[80.0, 82.0]);
        assert_eq!(m, 81.0);
        assert!((s.unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(mean_std(&[5.0, 5.0, 5.0]).1, Some(0.0));
        assert_eq!(mean_std(&[5.0]).1, None);
    }

    #[test]
    fn binary_rows_in_order() {
        let golds = [true, false, true, false];
        let a = binary_metrics(&[true, false, false, false], &golds, 1).unwrap();
        let b = binary_metrics(&golds, &golds, 2).unwrap();
        let rows = aggregate_runs(&[a, b], Task::Binary).unwrap();
        let names: Vec<_> = rows.iter().map(|r| r.metric.as_str()).collect();
        assert_eq!(names, BINARY_ROWS);
        assert_eq!(rows[0].mean, 100.0);
        assert_eq!(rows[1].mean, 75.0);
        assert!(aggregate_runs(&[], Task::Binary).is_err());
    }
}
