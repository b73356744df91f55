//! Corpus construction: ingestion filters, slur-based article selection,
//! per-article comment sampling and anonymization.

mod anonymize;
mod lexicon;
mod types;

use std::collections::{BTreeMap, HashMap};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use anonymize::{anonymize, is_handle_char};
pub use lexicon::{LexiconEntry, MatchMode, SeedLexicon, DEFAULT_SEEDS_TSV};
pub use types::{Article, Comment, SampledComment, SamplingConfig, DEFAULT_COVID_KEYWORDS};

use crate::error::{Error, Result};
use crate::fold::{Term, Tokenized};

/// Case- and accent-insensitive whole-word prefix matcher over article bodies.
#[derive(Debug, Clone)]
pub struct KeywordFilter {
    terms: Vec<Term>,
}

impl KeywordFilter {
    pub fn new<S: AsRef<str>>(keywords: &[S]) -> Result<Self> {
        let terms: Vec<Term> = keywords
            .iter()
            .map(|k| Term::new(k.as_ref(), true))
            .filter(|t| !t.is_empty())
            .collect();
        if terms.is_empty() {
            return Err(Error::Config("keyword list is empty".into()));
        }
        Ok(Self { terms })
    }

    pub fn matches(&self, text: &str) -> bool {
        let tokens = Tokenized::new(text);
        self.terms.iter().any(|t| t.occurs_in(&tokens))
    }
}

/// Keeps the articles whose body mentions at least one keyword.
pub fn filter_covid_articles<I, S>(articles: I, keywords: &[S]) -> Result<impl Iterator<Item = Article>>
where
    I: IntoIterator<Item = Article>,
    S: AsRef<str>,
{
    let filter = KeywordFilter::new(keywords)?;
    Ok(articles.into_iter().filter(move |a| filter.matches(&a.body)))
}

pub fn keep_first_level_replies<I>(comments: I) -> impl Iterator<Item = Comment>
where
    I: IntoIterator<Item = Comment>,
{
    comments.into_iter().filter(|c| c.reply_depth == 1)
}

/// Articles that are not linked to a news article carry no body.
pub fn drop_unlinked_articles<I>(articles: I) -> impl Iterator<Item = Article>
where
    I: IntoIterator<Item = Article>,
{
    articles.into_iter().filter(|a| !a.body.trim().is_empty())
}

pub fn mark_slur_comments(comments: &[Comment], lexicon: &SeedLexicon) -> Vec<bool> {
    comments
        .iter()
        .map(|c| {
            let tokens = Tokenized::new(&c.text);
            lexicon.entries().iter().any(|e| e.matches(&tokens))
        })
        .collect()
}

/// Articles with at least `cfg.min_marked_comments` marked comments, in input order.
pub fn select_articles(
    articles: &[Article],
    comments: &[Comment],
    marked: &[bool],
    cfg: &SamplingConfig,
) -> Result<Vec<Article>> {
    cfg.validate()?;
    if comments.len() != marked.len() {
        return Err(Error::DimensionMismatch {
            expected: comments.len(),
            got: marked.len(),
        });
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for (c, &m) in comments.iter().zip(marked) {
        if m {
            *counts.entry(c.article_id.as_str()).or_default() += 1;
        }
    }
    Ok(articles
        .iter()
        .filter(|a| counts.get(a.article_id.as_str()).copied().unwrap_or(0) >= cfg.min_marked_comments)
        .cloned()
        .collect())
}

/// RNG for one article, independent of processing order.
pub fn article_rng(seed: u64, article_id: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(article_id.as_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

/// Uniform sample without replacement among all eligible comments of
/// `article`, returned ordered by comment id. The draw depends only on the
/// seed, the article id and the set of eligible comments.
pub fn sample_comments_for_annotation(
    article: &Article,
    comments: &[Comment],
    cfg: &SamplingConfig,
) -> Result<Vec<Comment>> {
    cfg.validate()?;
    let mut eligible: Vec<&Comment> = comments
        .iter()
        .filter(|c| c.article_id == article.article_id && c.is_eligible())
        .collect();
    eligible.sort_by(|a, b| a.comment_id.cmp(&b.comment_id));
    eligible.dedup_by(|a, b| a.comment_id == b.comment_id);
    if eligible.is_empty() {
        log::warn!("article {} has no eligible comments", article.article_id);
        return Ok(Vec::new());
    }
    let amount = cfg.comments_per_article.min(eligible.len());
    let mut rng = article_rng(cfg.rng_seed, &article.article_id);
    let mut picked = index::sample(&mut rng, eligible.len(), amount).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| eligible[i].clone()).collect())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutletCounts {
    pub articles: usize,
    pub comments: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingReport {
    pub input_articles: usize,
    pub input_comments: usize,
    pub marked_comments: usize,
    pub selected_articles: usize,
    pub sampled_articles: usize,
    pub sampled_comments: usize,
    pub per_outlet: BTreeMap<String, OutletCounts>,
    /// Selected articles that had no eligible comment.
    pub empty_articles: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingOutput {
    pub sampled: Vec<SampledComment>,
    pub report: SamplingReport,
}

/// Marks, selects, samples and anonymizes. Comments whose article is not in
/// `articles` are ignored.
pub fn run_sampling(
    articles: &[Article],
    comments: &[Comment],
    lexicon: &SeedLexicon,
    cfg: &SamplingConfig,
) -> Result<SamplingOutput> {
    cfg.validate()?;
    let mut by_article: HashMap<&str, Vec<Comment>> = HashMap::new();
    for c in comments {
        by_article.entry(c.article_id.as_str()).or_default().push(c.clone());
    }
    let known: Vec<Comment> = articles
        .iter()
        .flat_map(|a| by_article.get(a.article_id.as_str()).into_iter().flatten().cloned())
        .collect();
    let marked = mark_slur_comments(&known, lexicon);
    let selected = select_articles(articles, &known, &marked, cfg)?;

    let mut report = SamplingReport {
        input_articles: articles.len(),
        input_comments: known.len(),
        marked_comments: marked.iter().filter(|&&m| m).count(),
        selected_articles: selected.len(),
        ..Default::default()
    };
    let mut sampled = Vec::new();
    for article in &selected {
        let pool = by_article
            .get(article.article_id.as_str())
            .map(Vec::as_slice)
            .unwrap_or_default();
        let picked = sample_comments_for_annotation(article, pool, cfg)?;
        if picked.is_empty() {
            report.empty_articles.push(article.article_id.clone());
            continue;
        }
        let outlet = report.per_outlet.entry(article.outlet.clone()).or_default();
        outlet.articles += 1;
        outlet.comments += picked.len();
        report.sampled_articles += 1;
        report.sampled_comments += picked.len();
        sampled.extend(picked.into_iter().map(|c| SampledComment {
            article_id: c.article_id,
            comment_id: c.comment_id,
            text: anonymize(&c.text),
        }));
    }
    Ok(SamplingOutput { sampled, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn article(id: &str, body: &str) -> Article {
        Article {
            article_id: id.into(),
            outlet: "@infobae".into(),
            tweet_text: format!("tweet {id}"),
            body: body.into(),
            url: format!("https://example.com/{id}"),
            published_at: "2020-04-01T00:00:00Z".into(),
        }
    }

    pub(crate) fn comment(id: &str, article_id: &str, text: &str, depth: u32) -> Comment {
        Comment {
            comment_id: id.into(),
            article_id: article_id.into(),
            text: text.into(),
            author_id: format!("u-{id}"),
            has_media: false,
            has_url: false,
            reply_depth: depth,
        }
    }

    #[test]
    fn covid_filter_examples() {
        let keep = |body: &str, kw: &str| filter_covid_articles(vec![article("a", body)], &[kw]).unwrap().count() == 1;
        assert!(keep("…la cuarentena sigue…", "cuarentena"));
        assert!(!keep("", "cuarentena"));
        assert!(keep("síntomas leves", "síntoma"));
        assert!(keep("SINTOMAS leves", "síntoma"));
        assert!(keep("nuevo caso de COVID-19", "covid"));
        assert!(!keep("el partido de ayer", "cuarentena"));
        let empty: [&str; 0] = [];
        assert!(matches!(
            filter_covid_articles(vec![article("a", "x")], &empty),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn first_level_replies_keep_order() {
        let cs = vec![
            comment("1", "a", "", 1),
            comment("2", "a", "", 2),
            comment("3", "a", "", 1),
        ];
        let ids: Vec<_> = keep_first_level_replies(cs).map(|c| c.comment_id).collect();
        assert_eq!(ids, ["1", "3"]);
        assert_eq!(keep_first_level_replies(Vec::new()).count(), 0);
        assert_eq!(keep_first_level_replies(vec![comment("1", "a", "", 3)]).count(), 0);
    }

    #[test]
    fn marking_examples() {
        let lex = SeedLexicon::new(vec![LexiconEntry::new(
            "negro",
            MatchMode::Inflected,
            &["plata", "guita"],
            &["de"],
        )
        .unwrap()])
        .unwrap();
        let cs = vec![
            comment("1", "a", "negra de mierda", 1),
            comment("2", "a", "me debe plata la negra", 1),
            comment("3", "a", "buen día a todos", 1),
        ];
        assert_eq!(mark_slur_comments(&cs, &lex), [true, false, false]);
    }

    #[test]
    fn selection_threshold() {
        let arts = vec![article("a", "x"), article("b", "x")];
        let cs = vec![
            comment("1", "a", "", 1),
            comment("2", "a", "", 1),
            comment("3", "a", "", 1),
            comment("4", "b", "", 1),
        ];
        let marked = [true, true, true, true];
        let mut cfg = SamplingConfig::default();
        let ids = |cfg: &SamplingConfig| -> Vec<String> {
            select_articles(&arts, &cs, &marked, cfg)
                .unwrap()
                .into_iter()
                .map(|a| a.article_id)
                .collect()
        };
        assert_eq!(ids(&cfg), ["a"]);
        cfg.min_marked_comments = 1;
        assert_eq!(ids(&cfg), ["a", "b"]);
        cfg.min_marked_comments = 0;
        assert!(select_articles(&arts, &cs, &marked, &cfg).is_err());
    }

    fn many_comments(article_id: &str, n: usize) -> Vec<Comment> {
        (0..n)
            .map(|i| comment(&format!("{article_id}-{i}"), article_id, "hola", 1))
            .collect()
    }

    #[test]
    fn sampling_quota_and_determinism() {
        let a = article("a", "x");
        let cfg = SamplingConfig {
            rng_seed: 7,
            ..Default::default()
        };
        let sixty = many_comments("a", 60);
        let s1 = sample_comments_for_annotation(&a, &sixty, &cfg).unwrap();
        assert_eq!(s1.len(), 50);
        let s2 = sample_comments_for_annotation(&a, &sixty, &cfg).unwrap();
        assert_eq!(s1, s2);
        let thirty = many_comments("a", 30);
        assert_eq!(sample_comments_for_annotation(&a, &thirty, &cfg).unwrap().len(), 30);
        let other = SamplingConfig {
            rng_seed: 8,
            ..cfg.clone()
        };
        assert_ne!(sample_comments_for_annotation(&a, &sixty, &other).unwrap(), s1);
    }

    #[test]
    fn sampling_skips_links_media_and_nested_replies() {
        let a = article("a", "x");
        let mut cs = many_comments("a", 4);
        cs[0].has_url = true;
        cs[1].has_media = true;
        cs[2].reply_depth = 2;
        let out = sample_comments_for_annotation(&a, &cs, &SamplingConfig::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].comment_id, "a-3");
        cs[3].has_url = true;
        assert!(sample_comments_for_annotation(&a, &cs, &SamplingConfig::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn run_sampling_is_order_independent_and_anonymizes() {
        let arts = vec![article("a", "cuarentena"), article("b", "cuarentena")];
        let mut cs = Vec::new();
        for art in ["a", "b"] {
            cs.push(comment(&format!("{art}-m1"), art, "@pepe negros de m", 1));
            cs.push(comment(&format!("{art}-m2"), art, "otra vez los chinos", 1));
            cs.extend(many_comments(art, 70));
        }
        let lex = SeedLexicon::default_seeds();
        let cfg = SamplingConfig {
            rng_seed: 3,
            ..Default::default()
        };
        let out = run_sampling(&arts, &cs, &lex, &cfg).unwrap();
        assert_eq!(out.report.selected_articles, 2);
        assert_eq!(out.report.sampled_comments, 100);
        assert_eq!(out.report.per_outlet["@infobae"].articles, 2);
        assert!(out.sampled.iter().all(|s| !s.text.contains("@pepe")));

        let mut rev_arts = arts.clone();
        rev_arts.reverse();
        let mut rev_cs = cs.clone();
        rev_cs.reverse();
        let rev = run_sampling(&rev_arts, &rev_cs, &lex, &cfg).unwrap();
        let set = |o: &SamplingOutput| {
            let mut v: Vec<_> = o.sampled.iter().map(|s| s.comment_id.clone()).collect();
            v.sort();
            v
        };
        assert_eq!(set(&out), set(&rev));
    }
}
