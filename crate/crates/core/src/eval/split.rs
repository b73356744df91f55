//! Train/dev/test partitioning with article-disjoint test sets.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitTargets {
    /// Share of all comments that should land in test.
    pub test_fraction: f64,
    /// Share of the remaining comments that go to dev.
    pub dev_fraction: f64,
}

impl Default for SplitTargets {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            dev_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
    pub train_dev_articles: Vec<String>,
    pub test_articles: Vec<String>,
}

/// Partitions `(comment_id, article_id)` pairs. Whole articles are drawn into
/// test until the comment target is approached as closely as article
/// granularity allows; the rest is split into train and dev per comment.
pub fn split_dataset(items: &[(String, String)], targets: SplitTargets, seed: u64) -> Result<SplitSpec> {
    for (name, f) in [
        ("test_fraction", targets.test_fraction),
        ("dev_fraction", targets.dev_fraction),
    ] {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!("{name} must lie in (0, 1), got {f}")));
        }
    }
    let mut by_article: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for (comment, article) in items {
        if !seen.insert(comment.as_str()) {
            return Err(Error::Validation(format!("comment {comment} listed twice")));
        }
        by_article.entry(article).or_default().push(comment);
    }
    if by_article.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 articles to hold out a test set, got {}",
            by_article.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut articles: Vec<&str> = by_article.keys().copied().collect();
    articles.shuffle(&mut rng);

    let total = items.len() as f64;
    let target = targets.test_fraction * total;
    let mut test_articles = BTreeSet::new();
    let mut test_count = 0usize;
    for &a in &articles {
        let size = by_article[a].len();
        let gap_now = (target - test_count as f64).abs();
        let gap_after = (target - (test_count + size) as f64).abs();
        if test_count as f64 >= target {
            break;
        }
        if gap_after <= gap_now || test_articles.is_empty() {
            test_articles.insert(a);
            test_count += size;
        }
    }
    if test_articles.len() == articles.len() {
        return Err(Error::Config(format!(
            "test_fraction {} leaves no article for train/dev",
            targets.test_fraction
        )));
    }

    let mut pool: Vec<&str> = articles
        .iter()
        .filter(|a| !test_articles.contains(*a))
        .flat_map(|a| by_article[a].iter().copied())
        .collect();
    pool.sort_unstable();
    pool.shuffle(&mut rng);
    let dev_count = (targets.dev_fraction * pool.len() as f64).round() as usize;
    if dev_count == 0 || dev_count >= pool.len() {
        return Err(Error::Config(format!(
            "dev_fraction {} cannot split {} train/dev comments",
            targets.dev_fraction,
            pool.len()
        )));
    }
    let sorted = |v: &[&str]| {
        let mut v: Vec<String> = v.iter().map(|s| s.to_string()).collect();
        v.sort();
        v
    };
    let test: Vec<&str> = test_articles
        .iter()
        .flat_map(|a| by_article[a].iter().copied())
        .collect();
    Ok(SplitSpec {
        seed,
        dev: sorted(&pool[..dev_count]),
        train: sorted(&pool[dev_count..]),
        test: sorted(&test),
        train_dev_articles: articles
            .iter()
            .filter(|a| !test_articles.contains(*a))
            .map(|a| a.to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
        test_articles: test_articles.into_iter().map(str::to_string).collect(),
    })
}
