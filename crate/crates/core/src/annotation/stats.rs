use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::alpha::agreement_report;
use super::types::{AnnotationRecord, Characteristic, GoldLabel};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicFigures {
    pub count: usize,
    pub calls_to_action: usize,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UserDistribution {
    /// Authors with at least one hateful comment.
    pub hateful_users: usize,
    pub mean_hateful_per_user: f64,
    pub users_over_10: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStatistics {
    pub comments: usize,
    pub articles: usize,
    pub hateful: usize,
    pub calls_to_action: usize,
    pub alpha_hateful: Option<f64>,
    pub alpha_calls: Option<f64>,
    pub per_characteristic: BTreeMap<Characteristic, CharacteristicFigures>,
    /// Hateful comments by number of attacked characteristics (1, 2, 3+).
    pub by_characteristic_count: BTreeMap<String, usize>,
    pub per_user: UserDistribution,
}

/// Corpus figures. `comment_article` and `comment_author` map comment ids to
/// their article and (hashed) author; comments missing from them are counted
/// but contribute no article or author.
pub fn dataset_statistics(
    gold: &[GoldLabel],
    records: &[AnnotationRecord],
    comment_article: &HashMap<String, String>,
    comment_author: &HashMap<String, String>,
) -> DatasetStatistics {
    let agreement = agreement_report(records);
    let mut stats = DatasetStatistics {
        comments: gold.len(),
        alpha_hateful: agreement.alpha_hateful,
        alpha_calls: agreement.alpha_calls,
        ..Default::default()
    };
    for c in Characteristic::ALL {
        stats.per_characteristic.insert(
            c,
            CharacteristicFigures {
                alpha: agreement.alpha_per_characteristic.get(&c).copied().flatten(),
                ..Default::default()
            },
        );
    }
    for key in ["1", "2", "3+"] {
        stats.by_characteristic_count.insert(key.to_string(), 0);
    }

    let articles: BTreeSet<&str> = gold
        .iter()
        .filter_map(|g| comment_article.get(&g.comment_id).map(String::as_str))
        .collect();
    stats.articles = articles.len();

    let mut per_user: HashMap<&str, usize> = HashMap::new();
    for g in gold.iter().filter(|g| g.hateful) {
        stats.hateful += 1;
        stats.calls_to_action += usize::from(g.calls_to_action);
        for c in &g.characteristics {
            let fig = stats.per_characteristic.get_mut(c).expect("all listed");
            fig.count += 1;
            fig.calls_to_action += usize::from(g.calls_to_action);
        }
        let bucket = match g.characteristics.len() {
            0 | 1 => "1",
            2 => "2",
            _ => "3+",
        };
        *stats.by_characteristic_count.get_mut(bucket).expect("listed") += 1;
        if let Some(author) = comment_author.get(&g.comment_id) {
            *per_user.entry(author.as_str()).or_default() += 1;
        }
    }
    if !per_user.is_empty() {
        let total: usize = per_user.values().sum();
        stats.per_user = UserDistribution {
            hateful_users: per_user.len(),
            mean_hateful_per_user: total as f64 / per_user.len() as f64,
            users_over_10: per_user.values().filter(|&&n| n > 10).count(),
        };
    }
    stats
}
