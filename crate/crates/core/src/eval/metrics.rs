//! Precision/recall/F1 in percentage points.

use serde::{Deserialize, Serialize};

use crate::annotation::LABEL_NAMES;
use crate::error::{Error, Result};

pub const HATEFUL: &str = "HATEFUL";
pub const NOT_HATEFUL: &str = "NOT_HATEFUL";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn tally(preds: impl IntoIterator<Item = bool>, golds: impl IntoIterator<Item = bool>) -> Self {
        let mut c = Self::default();
        for (p, g) in preds.into_iter().zip(golds) {
            match (p, g) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    /// The same matrix with the positive class swapped.
    pub fn flipped(self) -> Self {
        Self {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScores {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Scores for the positive class of `c`. Undefined ratios are reported as 0.
pub fn label_scores(label: &str, c: Confusion) -> LabelScores {
    let precision = if c.tp + c.fp == 0 {
        log::warn!("{label}: no predicted positives, precision set to 0");
        0.0
    } else {
        100.0 * c.tp as f64 / (c.tp + c.fp) as f64
    };
    let recall = if c.tp + c.fn_ == 0 {
        log::warn!("{label}: no gold positives, recall set to 0");
        0.0
    } else {
        100.0 * c.tp as f64 / (c.tp + c.fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    LabelScores {
        label: label.to_string(),
        precision,
        recall,
        f1,
        support: c.tp + c.fn_,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub per_label: Vec<LabelScores>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

impl RunMetrics {
    fn from_labels(seed: u64, per_label: Vec<LabelScores>) -> Self {
        let n = per_label.len() as f64;
        let mean = |f: fn(&LabelScores) -> f64| per_label.iter().map(f).sum::<f64>() / n;
        Self {
            seed,
            macro_precision: mean(|s| s.precision),
            macro_recall: mean(|s| s.recall),
            macro_f1: mean(|s| s.f1),
            per_label,
        }
    }

    pub fn label(&self, name: &str) -> Option<&LabelScores> {
        self.per_label.iter().find(|s| s.label == name)
    }
}

fn check_lengths(preds: usize, golds: usize) -> Result<()> {
    if preds != golds {
        return Err(Error::DimensionMismatch {
            expected: golds,
            got: preds,
        });
    }
    if golds == 0 {
        return Err(Error::InsufficientData("no examples to score".into()));
    }
    Ok(())
}

/// Hateful-class scores plus the non-hateful class; macro values average the two.
pub fn binary_metrics(preds: &[bool], golds: &[bool], seed: u64) -> Result<RunMetrics> {
    check_lengths(preds.len(), golds.len())?;
    let c = Confusion::tally(preds.iter().copied(), golds.iter().copied());
    Ok(RunMetrics::from_labels(
        seed,
        vec![label_scores(HATEFUL, c), label_scores(NOT_HATEFUL, c.flipped())],
    ))
}

/// Per-label positive-class scores over the 9-wide label vectors.
pub fn finegrained_metrics<P, G>(preds: &[P], golds: &[G], seed: u64) -> Result<RunMetrics>
where
    P: AsRef<[u8]>,
    G: AsRef<[u8]>,
{
    check_lengths(preds.len(), golds.len())?;
    for v in preds.iter().map(AsRef::as_ref).chain(golds.iter().map(AsRef::as_ref)) {
        if v.len() != LABEL_NAMES.len() {
            return Err(Error::DimensionMismatch {
                expected: LABEL_NAMES.len(),
                got: v.len(),
            });
        }
    }
    let per_label = LABEL_NAMES
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let c = Confusion::tally(
                preds.iter().map(|p| p.as_ref()[i] != 0),
                golds.iter().map(|g| g.as_ref()[i] != 0),
            );
            if c.tp + c.fp + c.fn_ == 0 {
                log::warn!("{name}: absent from gold and predictions, F1 set to 0");
            }
            label_scores(name, c)
        })
        .collect();
    Ok(RunMetrics::from_labels(seed, per_label))
}
