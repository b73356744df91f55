use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Article;
use crate::error::{Error, Result};

/// What accompanies a comment at classification time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextMode {
    /// The comment alone.
    None,
    /// The outlet's tweet as context.
    Tweet,
    /// The tweet plus the article body.
    Full,
}

impl ContextMode {
    pub const ALL: [ContextMode; 3] = [ContextMode::None, ContextMode::Tweet, ContextMode::Full];

    /// Sequence budget in encoder tokens, special tokens included.
    pub fn max_tokens(self) -> usize {
        match self {
            ContextMode::None => 128,
            ContextMode::Tweet => 256,
            ContextMode::Full => 512,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ContextMode::None => "none",
            ContextMode::Tweet => "tweet",
            ContextMode::Full => "full",
        }
    }

    /// Capitalized name for table headers.
    pub fn label(self) -> &'static str {
        match self {
            ContextMode::None => "None",
            ContextMode::Tweet => "Tweet",
            ContextMode::Full => "Full",
        }
    }
}

impl fmt::Display for ContextMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ContextMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "tweet" => Ok(Self::Tweet),
            "full" => Ok(Self::Full),
            other => Err(Error::Config(format!("unknown context mode {other:?}"))),
        }
    }
}

/// A context/comment pair; the encoder joins them with its separator token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelInput {
    pub text_a: String,
    pub text_b: String,
    pub mode: ContextMode,
}

impl ModelInput {
    pub fn comment_only(comment: impl Into<String>) -> Self {
        Self {
            text_a: String::new(),
            text_b: comment.into(),
            mode: ContextMode::None,
        }
    }
}

/// Assembles the encoder input for `comment` under `mode`. Texts are expected
/// to be normalized already.
pub fn build_model_input(comment: &str, article: &Article, mode: ContextMode) -> Result<ModelInput> {
    let text_a = match mode {
        ContextMode::None => String::new(),
        ContextMode::Tweet => article.tweet_text.clone(),
        ContextMode::Full => {
            if article.body.trim().is_empty() {
                return Err(Error::Validation(format!(
                    "article {} has no body for full-context input",
                    article.article_id
                )));
            }
            format!("{} {}", article.tweet_text, article.body)
        }
    };
    Ok(ModelInput {
        text_a,
        text_b: comment.to_string(),
        mode,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Truncation {
    pub input: ModelInput,
    pub context_truncated: bool,
    /// The comment alone did not fit and lost its tail.
    pub comment_truncated: bool,
}

fn keep_words(text: &str, n: usize) -> String {
    text.split_whitespace().take(n).collect::<Vec<_>>().join(" ")
}

/// Largest `n` in `0..=max` with `fits(n)`, assuming `fits` is monotone
/// decreasing in `n` and `fits(0)`.
fn largest_fitting(max: usize, fits: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0, max);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

/// Fits `input` into its mode's budget, cutting the context from its end
/// first and the comment only when the context is already gone.
pub fn truncate_to_budget(input: ModelInput, tokenizer_len: impl Fn(&ModelInput) -> usize) -> Truncation {
    let budget = input.mode.max_tokens();
    if tokenizer_len(&input) <= budget {
        return Truncation {
            input,
            context_truncated: false,
            comment_truncated: false,
        };
    }
    let context_words = input.text_a.split_whitespace().count();
    let with_context = |n: usize| ModelInput {
        text_a: keep_words(&input.text_a, n),
        text_b: input.text_b.clone(),
        mode: input.mode,
    };
    let bare = with_context(0);
    if tokenizer_len(&bare) <= budget {
        let n = largest_fitting(context_words, |n| tokenizer_len(&with_context(n)) <= budget);
        return Truncation {
            input: with_context(n),
            context_truncated: true,
            comment_truncated: false,
        };
    }
    let comment_words = input.text_b.split_whitespace().count();
    let with_comment = |n: usize| ModelInput {
        text_a: String::new(),
        text_b: keep_words(&input.text_b, n),
        mode: input.mode,
    };
    let n = largest_fitting(comment_words, |n| tokenizer_len(&with_comment(n)) <= budget);
    log::warn!(
        "comment exceeds the {} budget of {budget} tokens on its own; keeping {n} of {comment_words} words",
        input.mode
    );
    Truncation {
        input: with_comment(n),
        context_truncated: !input.text_a.is_empty(),
        comment_truncated: true,
    }
}
