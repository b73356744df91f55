use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A news item posted by an outlet; the context of its replies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub article_id: String,
    pub outlet: String,
    pub tweet_text: String,
    pub body: String,
    #[serde(default)]
    pub url: String,
    /// Kept verbatim from the archive.
    #[serde(default)]
    pub published_at: String,
}

/// A user reply under an outlet post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub comment_id: String,
    pub article_id: String,
    pub text: String,
    pub author_id: String,
    #[serde(default)]
    pub has_media: bool,
    #[serde(default)]
    pub has_url: bool,
    pub reply_depth: u32,
}

impl Comment {
    /// First-level reply without links or attached media.
    pub fn is_eligible(&self) -> bool {
        self.reply_depth == 1 && !self.has_url && !self.has_media
    }
}

/// Comment selected for annotation, after anonymization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampledComment {
    pub article_id: String,
    pub comment_id: String,
    pub text: String,
}

pub const DEFAULT_COVID_KEYWORDS: &[&str] = &[
    "coronavirus",
    "COVID-19",
    "COVID",
    "Wuhan",
    "cuarentena",
    "normalidad",
    "aislamiento",
    "padecimiento",
    "encierro",
    "fase",
    "infectado",
    "distanciamiento",
    "fiebre",
    "síntoma",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub covid_keywords: Vec<String>,
    pub min_marked_comments: usize,
    pub comments_per_article: usize,
    pub rng_seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            covid_keywords: DEFAULT_COVID_KEYWORDS.iter().map(|s| s.to_string()).collect(),
            min_marked_comments: 2,
            comments_per_article: 50,
            rng_seed: 0,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_marked_comments < 1 {
            return Err(Error::Config("min_marked_comments must be >= 1".into()));
        }
        if self.comments_per_article < 1 {
            return Err(Error::Config("comments_per_article must be >= 1".into()));
        }
        Ok(())
    }
}
