//! Pairwise co-occurrence of attacked characteristics.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotation::{Characteristic, GoldLabel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Comment,
    Article,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Comment => "comment",
            Level::Article => "article",
        }
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "comment" => Ok(Level::Comment),
            "article" => Ok(Level::Article),
            other => Err(Error::Config(format!("unknown co-occurrence level {other:?}"))),
        }
    }
}

/// Symmetric counts indexed in `Characteristic::ALL` order; the diagonal is 0.
pub type Matrix = [[usize; 8]; 8];

fn add_pairs(m: &mut Matrix, set: &BTreeSet<Characteristic>) {
    let idx: Vec<usize> = set.iter().map(|c| c.index()).collect();
    for (k, &i) in idx.iter().enumerate() {
        for &j in &idx[k + 1..] {
            m[i][j] += 1;
            m[j][i] += 1;
        }
    }
}

/// Comment level counts pairs inside each comment; article level counts pairs
/// in the union over an article's hateful comments. `article_of` is only
/// consulted at article level.
pub fn cooccurrence(golds: &[GoldLabel], article_of: &HashMap<String, String>, level: Level) -> Result<Matrix> {
    let mut m = [[0; 8]; 8];
    match level {
        Level::Comment => {
            for g in golds.iter().filter(|g| g.hateful) {
                add_pairs(&mut m, &g.characteristics);
            }
        }
        Level::Article => {
            let mut unions: BTreeMap<&str, BTreeSet<Characteristic>> = BTreeMap::new();
            for g in golds.iter().filter(|g| g.hateful) {
                let article = article_of
                    .get(&g.comment_id)
                    .ok_or_else(|| Error::NotFound(format!("article for comment {}", g.comment_id)))?;
                unions
                    .entry(article)
                    .or_default()
                    .extend(g.characteristics.iter().copied());
            }
            for set in unions.values() {
                add_pairs(&mut m, set);
            }
        }
    }
    Ok(m)
}
