//! Word-level uncased tokenizer with BERT-style special tokens.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use crate::error::{Error, Result};
use crate::fold::fold;
use crate::normalize::{truncate_to_budget, ContextMode, ModelInput};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const CLS: u32 = 2;
pub const SEP: u32 = 3;
pub const MASK: u32 = 4;
pub const SPECIALS: [&str; 5] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"];

fn piece_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\w+|[^\w\s]").expect("static regex"))
}

/// Splits folded text into word and punctuation pieces.
pub fn pieces(text: &str) -> Vec<String> {
    let folded = fold(text);
    piece_re().find_iter(&folded).map(|m| m.as_str().to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoding {
    pub ids: Vec<u32>,
    pub type_ids: Vec<u32>,
}

impl Encoding {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tokenizer {
    vocab: Vec<String>,
    index: HashMap<String, u32>,
}

impl Tokenizer {
    pub fn from_vocab(vocab: Vec<String>) -> Result<Self> {
        if vocab.len() < SPECIALS.len() || vocab[..SPECIALS.len()] != SPECIALS {
            return Err(Error::Validation(
                "vocabulary must start with [PAD] [UNK] [CLS] [SEP] [MASK]".into(),
            ));
        }
        let mut index = HashMap::with_capacity(vocab.len());
        for (i, tok) in vocab.iter().enumerate() {
            if index.insert(tok.clone(), i as u32).is_some() {
                return Err(Error::Validation(format!("duplicate vocabulary entry {tok:?}")));
            }
        }
        Ok(Self { vocab, index })
    }

    /// Keeps the `max_size` most frequent pieces seen at least `min_count`
    /// times; ties are ordered alphabetically.
    pub fn train<'a>(texts: impl IntoIterator<Item = &'a str>, max_size: usize, min_count: usize) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for text in texts {
            for p in pieces(text) {
                *counts.entry(p).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(tok, c)| *c >= min_count && !SPECIALS.contains(&tok.as_str()))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let room = max_size.saturating_sub(SPECIALS.len());
        let vocab = SPECIALS
            .iter()
            .map(|s| s.to_string())
            .chain(ranked.into_iter().take(room).map(|(t, _)| t))
            .collect();
        Self::from_vocab(vocab).expect("specials are unique")
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn token_id(&self, piece: &str) -> u32 {
        self.index.get(piece).copied().unwrap_or(UNK)
    }

    pub fn tokenize(&self, text: &str) -> Vec<u32> {
        pieces(text).iter().map(|p| self.token_id(p)).collect()
    }

    /// Token count of the full encoding, before any truncation.
    pub fn encoded_len(&self, input: &ModelInput) -> usize {
        let b = pieces(&input.text_b).len();
        match context_of(input) {
            Some(a) => pieces(a).len() + b + 3,
            None => b + 2,
        }
    }

    /// `[CLS] a [SEP] b [SEP]`, or `[CLS] b [SEP]` without context. The
    /// context is trimmed first if the pair exceeds the mode's budget.
    pub fn encode(&self, input: &ModelInput) -> Encoding {
        let budget = input.mode.max_tokens();
        let fitted = truncate_to_budget(input.clone(), |i| self.encoded_len(i));
        // Whole-word cuts are too coarse once the comment alone overflows;
        // cut its pieces instead.
        let (context, comment) = if fitted.comment_truncated {
            (None, input.text_b.as_str())
        } else {
            (context_of(&fitted.input), fitted.input.text_b.as_str())
        };
        let mut ids = vec![CLS];
        let mut type_ids = vec![0];
        if let Some(a) = context {
            ids.extend(self.tokenize(a));
            ids.push(SEP);
            type_ids.resize(ids.len(), 0);
        }
        let segment = u32::from(ids.len() > 1);
        ids.extend(self.tokenize(comment));
        ids.truncate(budget - 1);
        ids.push(SEP);
        type_ids.resize(ids.len(), segment);
        Encoding { ids, type_ids }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = self.vocab.join("\n");
        out.push('\n');
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_vocab(text.lines().map(str::to_string).collect())
    }
}

fn context_of(input: &ModelInput) -> Option<&str> {
    match input.mode {
        ContextMode::None => None,
        _ if input.text_a.trim().is_empty() => None,
        _ => Some(&input.text_a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok() -> Tokenizer {
        Tokenizer::train(["la vacuna llega hoy", "que llega la vacuna!"], 100, 1)
    }

    #[test]
    fn vocabulary_order() {
        let t = tok();
        assert_eq!(&t.vocab()[..5], SPECIALS);
        // most frequent first, ties alphabetical
        assert_eq!(&t.vocab()[5..8], ["la", "llega", "vacuna"]);
        assert_eq!(t.token_id("inexistente"), UNK);
        assert_eq!(t.tokenize("¡LLEGÁ!"), vec![UNK, t.token_id("llega"), t.token_id("!")]);
    }

    #[test]
    fn pair_layout() {
        let t = tok();
        let input = ModelInput {
            text_a: "la vacuna".into(),
            text_b: "llega".into(),
            mode: ContextMode::Tweet,
        };
        let e = t.encode(&input);
        assert_eq!(
            e.ids,
            vec![
                CLS,
                t.token_id("la"),
                t.token_id("vacuna"),
                SEP,
                t.token_id("llega"),
                SEP
            ]
        );
        assert_eq!(e.type_ids, vec![0, 0, 0, 0, 1, 1]);
        assert_eq!(t.encoded_len(&input), 6);
    }

    #[test]
    fn none_mode_ignores_context() {
        let t = tok();
        let mut input = ModelInput::comment_only("la vacuna");
        let bare = t.encode(&input);
        input.text_a = "llega hoy".into();
        assert_eq!(t.encode(&input), bare);
        assert_eq!(bare.type_ids, vec![0; 4]);
    }

    #[test]
    fn respects_budget() {
        let t = tok();
        let long = "la ".repeat(400);
        let input = ModelInput {
            text_a: long.clone(),
            text_b: "vacuna".into(),
            mode: ContextMode::Tweet,
        };
        let e = t.encode(&input);
        assert_eq!(e.len(), 256);
        assert_eq!(e.ids[e.len() - 2], t.token_id("vacuna"));
        let e = t.encode(&ModelInput::comment_only("!".repeat(1000)));
        assert_eq!(e.len(), 128);
        assert_eq!(*e.ids.last().unwrap(), SEP);
    }

    #[test]
    fn vocab_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let t = tok();
        t.save(dir.path().join("vocab.txt")).unwrap();
        assert_eq!(Tokenizer::load(dir.path().join("vocab.txt")).unwrap(), t);
        assert!(Tokenizer::from_vocab(vec!["a".into()]).is_err());
    }
}
