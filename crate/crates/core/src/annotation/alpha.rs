//! Nominal Krippendorff's alpha.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::types::{AnnotationRecord, Characteristic};
use crate::error::{Error, Result};

/// Alpha for nominal data, `α = 1 − D_o / D_e`, via the coincidence matrix.
///
/// `ratings` is annotators × items; `None` marks a missing rating. Items
/// with fewer than two ratings are not pairable and are ignored.
pub fn krippendorff_alpha<T: Ord>(ratings: &[Vec<Option<T>>]) -> Result<f64> {
    let items = ratings.first().map_or(0, Vec::len);
    if ratings.iter().any(|row| row.len() != items) {
        return Err(Error::Validation("rating matrix rows differ in length".into()));
    }

    let mut categories: BTreeMap<&T, usize> = BTreeMap::new();
    for value in ratings.iter().flatten().flatten() {
        let next = categories.len();
        categories.entry(value).or_insert(next);
    }
    let k = categories.len();

    // observed coincidences: only the diagonal and the marginals are needed
    let mut diagonal = vec![0.0f64; k];
    let mut marginals = vec![0.0f64; k];
    let mut pairable_items = 0usize;
    let mut counts = vec![0usize; k];
    for item in 0..items {
        counts.iter_mut().for_each(|c| *c = 0);
        let mut m = 0usize;
        for row in ratings {
            if let Some(v) = &row[item] {
                counts[categories[v]] += 1;
                m += 1;
            }
        }
        if m < 2 {
            continue;
        }
        pairable_items += 1;
        let scale = 1.0 / (m as f64 - 1.0);
        for (c, &n_uc) in counts.iter().enumerate() {
            if n_uc == 0 {
                continue;
            }
            let n_uc = n_uc as f64;
            diagonal[c] += n_uc * (n_uc - 1.0) * scale;
            marginals[c] += n_uc * (m as f64 - 1.0) * scale;
        }
    }
    if pairable_items < 2 {
        return Err(Error::InsufficientData(format!(
            "{pairable_items} item(s) with two or more ratings, need at least 2"
        )));
    }

    let n: f64 = marginals.iter().sum();
    let observed = n - diagonal.iter().sum::<f64>();
    let expected = n * n - marginals.iter().map(|x| x * x).sum::<f64>();
    if expected <= 0.0 {
        return Err(Error::UndefinedAlpha);
    }
    Ok(1.0 - (n - 1.0) * observed / expected)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub alpha_hateful: Option<f64>,
    pub alpha_calls: Option<f64>,
    pub alpha_per_characteristic: BTreeMap<Characteristic, Option<f64>>,
}

/// Builds one annotators × comments matrix per label. Every record rates
/// every label: calls answers and characteristics absent from a record count
/// as "not selected".
pub fn agreement_report<'a, I>(records: I) -> AgreementReport
where
    I: IntoIterator<Item = &'a AnnotationRecord>,
{
    let records: Vec<&AnnotationRecord> = records.into_iter().collect();
    let annotators: BTreeSet<&str> = records.iter().map(|r| r.annotator_id.as_str()).collect();
    let comments: BTreeSet<&str> = records.iter().map(|r| r.comment_id.as_str()).collect();
    let row: BTreeMap<&str, usize> = annotators.iter().enumerate().map(|(i, a)| (*a, i)).collect();
    let col: BTreeMap<&str, usize> = comments.iter().enumerate().map(|(i, c)| (*c, i)).collect();

    let matrix = |f: &dyn Fn(&AnnotationRecord) -> bool| -> Vec<Vec<Option<bool>>> {
        let mut m = vec![vec![None; comments.len()]; annotators.len()];
        for r in &records {
            m[row[r.annotator_id.as_str()]][col[r.comment_id.as_str()]] = Some(f(r));
        }
        m
    };
    let alpha = |f: &dyn Fn(&AnnotationRecord) -> bool| krippendorff_alpha(&matrix(f)).ok();

    AgreementReport {
        alpha_hateful: alpha(&|r| r.hateful),
        alpha_calls: alpha(&|r| r.calls_to_action == Some(true)),
        alpha_per_characteristic: Characteristic::ALL
            .into_iter()
            .map(|c| (c, alpha(&|r: &AnnotationRecord| r.characteristics.contains(&c))))
            .collect(),
    }
}
