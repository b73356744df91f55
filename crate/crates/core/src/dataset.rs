//! Joins gold labels with comment and article text into model examples.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::annotation::GoldLabel;
use crate::classifier::{Example, Task};
use crate::corpus::{Article, SampledComment};
use crate::error::{Error, Result};
use crate::eval::ItemText;
use crate::normalize::{build_model_input, normalize_text_with, ContextMode, EmojiTable, ModelInput};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledComment {
    pub comment_id: String,
    pub article_id: String,
    pub text: String,
    pub gold: GoldLabel,
}

/// Target vector for `task`: `[hateful]`, or the 9-wide label vector.
pub fn target(gold: &GoldLabel, task: Task) -> Vec<f32> {
    match task {
        Task::Binary => vec![f32::from(u8::from(gold.hateful))],
        Task::FineGrained => gold.label_vector().iter().map(|&v| f32::from(v)).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct LabeledCorpus {
    items: Vec<LabeledComment>,
    index: HashMap<String, usize>,
    articles: BTreeMap<String, Article>,
    emojis: EmojiTable,
}

impl LabeledCorpus {
    /// Every gold label must refer to a known comment whose article is known.
    pub fn join(gold: &[GoldLabel], comments: &[SampledComment], articles: &[Article]) -> Result<Self> {
        let texts: HashMap<&str, &SampledComment> = comments.iter().map(|c| (c.comment_id.as_str(), c)).collect();
        let articles: BTreeMap<String, Article> = articles.iter().map(|a| (a.article_id.clone(), a.clone())).collect();
        let mut items = Vec::with_capacity(gold.len());
        for g in gold {
            g.check()?;
            let c = texts
                .get(g.comment_id.as_str())
                .ok_or_else(|| Error::NotFound(format!("text of comment {}", g.comment_id)))?;
            if !articles.contains_key(&c.article_id) {
                return Err(Error::NotFound(format!(
                    "article {} of comment {}",
                    c.article_id, c.comment_id
                )));
            }
            items.push(LabeledComment {
                comment_id: c.comment_id.clone(),
                article_id: c.article_id.clone(),
                text: c.text.clone(),
                gold: g.clone(),
            });
        }
        items.sort_by(|a, b| a.comment_id.cmp(&b.comment_id));
        let mut index = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if index.insert(item.comment_id.clone(), i).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate gold label for {}",
                    item.comment_id
                )));
            }
        }
        Ok(Self {
            items,
            index,
            articles,
            emojis: EmojiTable::bundled().clone(),
        })
    }

    pub fn with_emojis(mut self, table: EmojiTable) -> Self {
        self.emojis = table;
        self
    }

    pub fn items(&self) -> &[LabeledComment] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn article(&self, id: &str) -> Option<&Article> {
        self.articles.get(id)
    }

    pub fn get(&self, comment_id: &str) -> Result<&LabeledComment> {
        self.index
            .get(comment_id)
            .map(|&i| &self.items[i])
            .ok_or_else(|| Error::NotFound(format!("labeled comment {comment_id}")))
    }

    /// `(comment_id, article_id)` pairs for splitting.
    pub fn split_items(&self) -> Vec<(String, String)> {
        self.items
            .iter()
            .map(|i| (i.comment_id.clone(), i.article_id.clone()))
            .collect()
    }

    pub fn comment_article(&self) -> HashMap<String, String> {
        self.items
            .iter()
            .map(|i| (i.comment_id.clone(), i.article_id.clone()))
            .collect()
    }

    /// Normalized encoder input for one comment.
    pub fn input(&self, comment_id: &str, mode: ContextMode) -> Result<ModelInput> {
        let item = self.get(comment_id)?;
        let article = &self.articles[&item.article_id];
        let norm = |t: &str| normalize_text_with(t, &self.emojis);
        let normalized = Article {
            tweet_text: norm(&article.tweet_text),
            body: norm(&article.body),
            ..article.clone()
        };
        build_model_input(&norm(&item.text), &normalized, mode)
    }

    pub fn examples(&self, ids: &[String], mode: ContextMode, task: Task) -> Result<Vec<Example>> {
        ids.iter()
            .map(|id| {
                Ok(Example {
                    input: self.input(id, mode)?,
                    target: target(&self.get(id)?.gold, task),
                })
            })
            .collect()
    }

    pub fn golds(&self, ids: &[String]) -> Result<Vec<GoldLabel>> {
        ids.iter().map(|id| Ok(self.get(id)?.gold.clone())).collect()
    }

    /// Raw comment and its tweet, for error listings.
    pub fn item_texts(&self, ids: &[String]) -> Result<Vec<ItemText>> {
        ids.iter()
            .map(|id| {
                let item = self.get(id)?;
                Ok(ItemText {
                    comment_id: id.clone(),
                    comment: item.text.clone(),
                    context: self.articles[&item.article_id].tweet_text.clone(),
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::Characteristic;

    fn fixture() -> (Vec<GoldLabel>, Vec<SampledComment>, Vec<Article>) {
        let article = Article {
            article_id: "a1".into(),
            outlet: "@clarincom".into(),
            tweet_text: "Cuarentena #QuedateEnCasa".into(),
            body: "Texto completo".into(),
            url: String::new(),
            published_at: String::new(),
        };
        let comments = vec![
            SampledComment {
                article_id: "a1".into(),
                comment_id: "c2".into(),
                text: "jajajaja @user".into(),
            },
            SampledComment {
                article_id: "a1".into(),
                comment_id: "c1".into(),
                text: "que se vayan".into(),
            },
        ];
        let gold = vec![
            GoldLabel {
                comment_id: "c1".into(),
                hateful: true,
                calls_to_action: true,
                characteristics: [Characteristic::Racism].into_iter().collect(),
            },
            GoldLabel {
                comment_id: "c2".into(),
                hateful: false,
                calls_to_action: false,
                characteristics: Default::default(),
            },
        ];
        (gold, comments, vec![article])
    }

    #[test]
    fn builds_examples() {
        let (g, c, a) = fixture();
        let corpus = LabeledCorpus::join(&g, &c, &a).unwrap();
        assert_eq!(corpus.items()[0].comment_id, "c1");
        let ids = vec!["c1".to_string(), "c2".to_string()];
        let ex = corpus.examples(&ids, ContextMode::Tweet, Task::FineGrained).unwrap();
        assert_eq!(ex[0].target, vec![1., 0., 0., 1., 0., 0., 0., 0., 0.]);
        assert_eq!(ex[0].input.text_a, "Cuarentena hashtag Quedate En Casa hashtag");
        assert_eq!(ex[1].input.text_b, "jaja @user");
        let full = corpus.examples(&ids, ContextMode::Full, Task::Binary).unwrap();
        assert!(full[0].input.text_a.ends_with("Texto completo"));
        assert_eq!(full[1].target, vec![0.0]);
        let none = corpus.examples(&ids, ContextMode::None, Task::Binary).unwrap();
        assert_eq!(none[0].input.text_a, "");
    }

    #[test]
    fn missing_text_or_article() {
        let (g, c, a) = fixture();
        assert!(LabeledCorpus::join(&g, &c[..1], &a).is_err());
        assert!(LabeledCorpus::join(&g, &c, &[]).is_err());
        assert!(LabeledCorpus::join(&g, &c, &a).unwrap().get("zz").is_err());
    }
}
