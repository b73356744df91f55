//! Where context changes the binary decision.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bucket {
    /// Hateful; missed without context, caught with it.
    RecoveredByContext,
    /// Not hateful; flagged without context, cleared with it.
    ClearedByContext,
    /// Hateful; missed by both classifiers.
    MissedByBoth,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemText {
    pub comment_id: String,
    pub comment: String,
    pub context: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorItem {
    pub bucket: Bucket,
    pub comment_id: String,
    pub comment: String,
    pub context: String,
    pub gold: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorAnalysis {
    pub counts: BTreeMap<Bucket, usize>,
    pub items: Vec<ErrorItem>,
}

pub fn classify(gold: bool, noctx: bool, ctx: bool) -> Option<Bucket> {
    match (gold, noctx, ctx) {
        (true, false, true) => Some(Bucket::RecoveredByContext),
        (false, true, false) => Some(Bucket::ClearedByContext),
        (true, false, false) => Some(Bucket::MissedByBoth),
        _ => None,
    }
}

pub fn error_analysis(
    preds_ctx: &[bool],
    preds_noctx: &[bool],
    golds: &[bool],
    texts: &[ItemText],
) -> Result<ErrorAnalysis> {
    for len in [preds_ctx.len(), preds_noctx.len(), texts.len()] {
        if len != golds.len() {
            return Err(Error::DimensionMismatch {
                expected: golds.len(),
                got: len,
            });
        }
    }
    let mut counts: BTreeMap<Bucket, usize> = [
        Bucket::RecoveredByContext,
        Bucket::ClearedByContext,
        Bucket::MissedByBoth,
    ]
    .into_iter()
    .map(|b| (b, 0))
    .collect();
    let mut items = Vec::new();
    for i in 0..golds.len() {
        if let Some(bucket) = classify(golds[i], preds_noctx[i], preds_ctx[i]) {
            *counts.entry(bucket).or_default() += 1;
            items.push(ErrorItem {
                bucket,
                comment_id: texts[i].comment_id.clone(),
                comment: texts[i].comment.clone(),
                context: texts[i].context.clone(),
                gold: golds[i],
            });
        }
    }
    items.sort_by(|a, b| a.bucket.cmp(&b.bucket).then_with(|| a.comment_id.cmp(&b.comment_id)));
    Ok(ErrorAnalysis { counts, items })
}
