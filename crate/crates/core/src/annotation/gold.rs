use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::types::{AnnotationRecord, Characteristic, GoldLabel};
use crate::error::{Error, Result};

/// Majority aggregation for one comment.
///
/// Hateful needs two hateful votes and CALLS two positive calls answers;
/// each characteristic needs a single vote. A non-hateful gold label carries
/// nothing else.
pub fn compute_gold_label(records: &[AnnotationRecord]) -> Result<GoldLabel> {
    let first = records
        .first()
        .ok_or_else(|| Error::InsufficientData("no annotation records".into()))?;
    let comment_id = first.comment_id.clone();
    if records.iter().any(|r| r.comment_id != comment_id) {
        return Err(Error::Validation("records belong to different comments".into()));
    }
    let mut annotators = HashSet::new();
    for r in records {
        r.validate()?;
        if !annotators.insert(r.annotator_id.as_str()) {
            return Err(Error::Validation(format!(
                "annotator {} rated comment {comment_id} twice",
                r.annotator_id
            )));
        }
    }
    if records.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "comment {comment_id} has {} annotation(s), need at least 2",
            records.len()
        )));
    }
    let hateful_votes = records.iter().filter(|r| r.hateful).count();
    if records.len() == 2 && hateful_votes == 1 {
        return Err(Error::InsufficientData(format!(
            "comment {comment_id} has a split first pass and no third annotation"
        )));
    }
    let hateful = hateful_votes >= 2;
    if !hateful {
        return Ok(GoldLabel {
            comment_id,
            hateful: false,
            calls_to_action: false,
            characteristics: BTreeSet::new(),
        });
    }
    let calls_votes = records.iter().filter(|r| r.calls_to_action == Some(true)).count();
    let characteristics: BTreeSet<Characteristic> =
        records.iter().flat_map(|r| r.characteristics.iter().copied()).collect();
    Ok(GoldLabel {
        comment_id,
        hateful,
        calls_to_action: calls_votes >= 2,
        characteristics,
    })
}

/// Groups records by comment and aggregates each group, ordered by comment id.
pub fn compute_gold_labels<'a, I>(records: I) -> Result<Vec<GoldLabel>>
where
    I: IntoIterator<Item = &'a AnnotationRecord>,
{
    group_by_comment(records)
        .into_values()
        .map(|group| compute_gold_label(&group))
        .collect()
}

pub fn group_by_comment<'a, I>(records: I) -> BTreeMap<String, Vec<AnnotationRecord>>
where
    I: IntoIterator<Item = &'a AnnotationRecord>,
{
    let mut groups: BTreeMap<String, Vec<AnnotationRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.comment_id.clone()).or_default().push(r.clone());
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use Characteristic::*;

    fn h(a: &str, calls: bool, chars: &[Characteristic]) -> AnnotationRecord {
        AnnotationRecord::hateful(a, "c", calls, chars.iter().copied())
    }

    fn n(a: &str) -> AnnotationRecord {
        AnnotationRecord::not_hateful(a, "c")
    }

    #[test]
    fn majority_examples() {
        let g = compute_gold_label(&[h("a", true, &[Racism]), h("b", false, &[Racism, Class]), n("c")]).unwrap();
        assert!(g.hateful);
        assert!(!g.calls_to_action);
        assert_eq!(g.characteristics, [Racism, Class].into());

        let g = compute_gold_label(&[n("a"), n("b")]).unwrap();
        assert!(!g.hateful && !g.calls_to_action && g.characteristics.is_empty());

        let g = compute_gold_label(&[h("a", true, &[Women]), n("b"), n("c")]).unwrap();
        assert!(!g.hateful);
        assert!(g.characteristics.is_empty());
        assert!(!g.calls_to_action);
    }

    #[test]
    fn calls_need_two_votes() {
        let g = compute_gold_label(&[h("a", true, &[Criminal]), h("b", true, &[Criminal]), n("c")]).unwrap();
        assert!(g.calls_to_action);
    }

    #[test]
    fn errors() {
        assert!(compute_gold_label(&[]).is_err());
        assert!(compute_gold_label(&[n("a")]).is_err());
        assert!(compute_gold_label(&[h("a", false, &[Class]), n("b")]).is_err());
        assert!(compute_gold_label(&[n("a"), n("a")]).is_err());
        assert!(compute_gold_label(&[h("a", false, &[]), n("b"), n("c")]).is_err());
    }

    #[test]
    fn third_vote_never_flips_agreed_hate() {
        let base = [h("a", false, &[Politics]), h("b", false, &[Politics])];
        assert!(compute_gold_label(&base).unwrap().hateful);
        let mut with_third = base.to_vec();
        with_third.push(n("c"));
        assert!(compute_gold_label(&with_third).unwrap().hateful);
    }

    #[test]
    fn permutation_invariant() {
        let rs = [h("a", true, &[Racism]), h("b", true, &[Class]), n("c")];
        let expected = compute_gold_label(&rs).unwrap();
        for perm in [[0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            let shuffled: Vec<_> = perm.iter().map(|&i| rs[i].clone()).collect();
            assert_eq!(compute_gold_label(&shuffled).unwrap(), expected);
        }
    }
}
