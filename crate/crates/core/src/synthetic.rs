//! Synthetic corpora where the label depends on context × comment.
//!
//! Each post is about one of a few topics and each comment carries one cue
//! word. A comment is hateful exactly when its cue belongs to the post's
//! topic, so without the post the label is unpredictable from the comment.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationRecord, AnnotationStore, Characteristic, GoldLabel};
use crate::classifier::{
    train, Classifier, EncoderCheckpoint, EncoderConfig, Example, Prediction, Task, Tokenizer, TrainConfig,
};
use crate::corpus::{article_rng, Article, Comment};
use crate::dataset::target;
use crate::error::Result;
use crate::eval::{binary_metrics, RunMetrics};
use crate::normalize::{ContextMode, ModelInput};

pub struct Topic {
    pub keyword: &'static str,
    pub cue: &'static str,
    pub characteristic: Characteristic,
}

pub const TOPICS: [Topic; 3] = [
    Topic {
        keyword: "inmigrantes",
        cue: "frontera",
        characteristic: Characteristic::Racism,
    },
    Topic {
        keyword: "diputados",
        cue: "urnas",
        characteristic: Characteristic::Politics,
    },
    Topic {
        keyword: "conductora",
        cue: "cocina",
        characteristic: Characteristic::Women,
    },
];

const FILLER: [&str; 24] = [
    "hoy", "mañana", "siempre", "nunca", "todo", "nada", "gente", "pais", "ciudad", "barrio", "semana", "noticia",
    "gobierno", "calle", "tiempo", "verdad", "mentira", "otra", "vez", "bueno", "malo", "claro", "mucho", "poco",
];

const OUTLETS: [&str; 3] = ["@clarincom", "@infobae", "@LANACION"];

/// Phrase marking a call to action.
pub const CALL_CUE: &str = "hay que";

/// Seed term planted so articles pass lexicon-based selection.
pub const MARKER: &str = "chinos";

fn filler<R: Rng>(rng: &mut R, lo: usize, hi: usize) -> String {
    let n = rng.random_range(lo..=hi);
    (0..n)
        .map(|_| *FILLER.choose(rng).expect("non-empty"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticPair {
    pub context: String,
    pub comment: String,
    pub topic: usize,
    pub cue: usize,
    pub hateful: bool,
}

impl SyntheticPair {
    pub fn input(&self, mode: ContextMode) -> ModelInput {
        let text_a = match mode {
            ContextMode::None => String::new(),
            _ => self.context.clone(),
        };
        ModelInput {
            text_a,
            text_b: self.comment.clone(),
            mode,
        }
    }

    pub fn example(&self, mode: ContextMode) -> Example {
        Example {
            input: self.input(mode),
            target: vec![f32::from(u8::from(self.hateful))],
        }
    }
}

/// `n` independent post/comment pairs with topic and cue drawn uniformly.
pub fn context_pairs(n: usize, seed: u64) -> Vec<SyntheticPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let topic = rng.random_range(0..TOPICS.len());
            let cue = rng.random_range(0..TOPICS.len());
            let context = format!(
                "{} {} {}",
                filler(&mut rng, 1, 3),
                TOPICS[topic].keyword,
                filler(&mut rng, 1, 3)
            );
            let comment = format!(
                "{} {} {}",
                filler(&mut rng, 0, 3),
                TOPICS[cue].cue,
                filler(&mut rng, 0, 3)
            );
            SyntheticPair {
                context,
                comment: comment.trim().to_string(),
                topic,
                cue,
                hateful: topic == cue,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub articles: usize,
    pub comments_per_article: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    pub articles: Vec<Article>,
    pub comments: Vec<Comment>,
    /// Latent labels keyed by comment id.
    pub truth: BTreeMap<String, GoldLabel>,
}

/// Raw articles and replies in the ingest format, with latent labels.
pub fn synthetic_corpus(spec: &SyntheticSpec) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = SyntheticCorpus {
        articles: Vec::with_capacity(spec.articles),
        comments: Vec::new(),
        truth: BTreeMap::new(),
    };
    for a in 0..spec.articles {
        let article_id = format!("a{a:04}");
        let topic = rng.random_range(0..TOPICS.len());
        out.articles.push(Article {
            article_id: article_id.clone(),
            outlet: OUTLETS[a % OUTLETS.len()].to_string(),
            tweet_text: format!("Cuarentena: {} {}", TOPICS[topic].keyword, filler(&mut rng, 2, 5)),
            body: format!(
                "En plena cuarentena, {} {} {}.",
                filler(&mut rng, 5, 10),
                TOPICS[topic].keyword,
                filler(&mut rng, 5, 10)
            ),
            url: format!("https://example.com/{article_id}"),
            published_at: "2020-05-01T12:00:00Z".into(),
        });
        for c in 0..spec.comments_per_article {
            let comment_id = format!("{article_id}c{c:03}");
            let cue = rng.random_range(0..TOPICS.len());
            let hateful = cue == topic;
            let calls = hateful && rng.random_bool(0.3);
            // The first two replies always carry the marker so every article qualifies.
            let marked = c < 2 || rng.random_bool(0.2);
            let mut words = vec![filler(&mut rng, 1, 4), TOPICS[cue].cue.to_string()];
            if calls {
                words.push(CALL_CUE.into());
            }
            if marked {
                words.push(MARKER.into());
            }
            if rng.random_bool(0.1) {
                words.push(format!("@vecino_{}", rng.random_range(0..50)));
            }
            out.comments.push(Comment {
                comment_id: comment_id.clone(),
                article_id: article_id.clone(),
                text: words.join(" "),
                author_id: format!("u{}", rng.random_range(0..40)),
                has_media: false,
                has_url: false,
                reply_depth: 1,
            });
            out.truth.insert(
                comment_id.clone(),
                GoldLabel {
                    comment_id,
                    hateful,
                    calls_to_action: calls,
                    characteristics: if hateful {
                        [TOPICS[topic].characteristic].into_iter().collect()
                    } else {
                        Default::default()
                    },
                },
            );
        }
    }
    out
}

/// Examples straight from latent labels, skipping the annotation workflow.
pub fn truth_examples(corpus: &SyntheticCorpus, mode: ContextMode, task: Task) -> Vec<Example> {
    let articles: BTreeMap<&str, &Article> = corpus.articles.iter().map(|a| (a.article_id.as_str(), a)).collect();
    corpus
        .comments
        .iter()
        .map(|c| {
            let a = articles[c.article_id.as_str()];
            let text_a = match mode {
                ContextMode::None => String::new(),
                ContextMode::Tweet => a.tweet_text.clone(),
                ContextMode::Full => format!("{} {}", a.tweet_text, a.body),
            };
            Example {
                input: ModelInput {
                    text_a,
                    text_b: c.text.clone(),
                    mode,
                },
                target: target(&corpus.truth[&c.comment_id], task),
            }
        })
        .collect()
}

/// Every annotator answers every pending task until none remain. Each vote
/// follows the latent label, flipped with probability `noise`. Returns the
/// number of records submitted.
pub fn simulate_annotations(
    store: &mut AnnotationStore,
    truth: &BTreeMap<String, GoldLabel>,
    noise: f64,
    seed: u64,
) -> Result<usize> {
    let mut submitted = 0;
    loop {
        let mut progressed = false;
        for annotator in store.pool().to_vec() {
            while let Some(task) = store.next_task(&annotator) {
                for c in &task.comments {
                    let mut rng = article_rng(seed, &format!("{annotator}/{}", c.comment_id));
                    let gold = truth.get(&c.comment_id);
                    let latent = gold.is_some_and(|g| g.hateful);
                    let vote = latent ^ rng.random_bool(noise);
                    let record = if vote {
                        let chars = match gold {
                            Some(g) if g.hateful => g.characteristics.clone(),
                            _ => [*Characteristic::ALL.choose(&mut rng).expect("non-empty")]
                                .into_iter()
                                .collect(),
                        };
                        let calls = gold.is_some_and(|g| g.calls_to_action);
                        AnnotationRecord::hateful(&annotator, &c.comment_id, calls, chars)
                    } else {
                        AnnotationRecord::not_hateful(&annotator, &c.comment_id)
                    };
                    store.submit(record)?;
                    submitted += 1;
                    progressed = true;
                }
                if task.comments.is_empty() {
                    break;
                }
            }
        }
        if !progressed {
            return Ok(submitted);
        }
    }
}

/// Trains a fresh tiny encoder on `pairs` under `mode` and scores it on a
/// held-out tenth. Pairs are split 80/10/10 in order.
pub fn context_benefit_run(pairs: &[SyntheticPair], mode: ContextMode, cfg: &TrainConfig) -> Result<RunMetrics> {
    let n = pairs.len();
    let (train_end, dev_end) = (n * 8 / 10, n * 9 / 10);
    let examples: Vec<Example> = pairs.iter().map(|p| p.example(mode)).collect();
    let tokenizer = Tokenizer::train(
        examples[..train_end]
            .iter()
            .flat_map(|e| [e.input.text_a.as_str(), e.input.text_b.as_str()]),
        1000,
        1,
    );
    let encoder = EncoderCheckpoint::fresh(EncoderConfig::tiny(tokenizer.vocab_size()), tokenizer, mode)?;
    let mut model = Classifier::build(&encoder, Task::Binary, cfg.seed)?;
    train(&mut model, &examples[..train_end], &examples[train_end..dev_end], cfg)?;
    let test = &examples[dev_end..];
    let inputs: Vec<ModelInput> = test.iter().map(|e| e.input.clone()).collect();
    let preds: Vec<bool> = model
        .predict(&inputs, cfg.threshold)?
        .iter()
        .map(Prediction::is_positive)
        .collect();
    let golds: Vec<bool> = test.iter().map(|e| e.target[0] >= 0.5).collect();
    binary_metrics(&preds, &golds, cfg.seed)
}
