//! Accent folding and word-level term matching shared by the keyword filter
//! and the slur lexicon.

use std::sync::OnceLock;

use rust_stemmers::{Algorithm, Stemmer};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

fn stemmer() -> &'static Stemmer {
    static STEMMER: OnceLock<Stemmer> = OnceLock::new();
    STEMMER.get_or_init(|| Stemmer::create(Algorithm::Spanish))
}

/// Lowercases and strips diacritics ("Síntoma" -> "sintoma", "ñ" -> "n").
pub fn fold(text: &str) -> String {
    text.nfd()
        .filter(|c| !is_combining_mark(*c))
        .flat_map(char::to_lowercase)
        .collect()
}

/// Splits folded text into maximal alphanumeric runs.
pub fn words(folded: &str) -> Vec<&str> {
    folded
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect()
}

pub fn stem(word: &str) -> String {
    stemmer().stem(word).into_owned()
}

/// A folded, tokenized text with per-word stems, ready for repeated matching.
#[derive(Debug, Clone)]
pub struct Tokenized {
    pub words: Vec<String>,
    pub stems: Vec<String>,
}

impl Tokenized {
    pub fn new(text: &str) -> Self {
        let folded = fold(text);
        let words: Vec<String> = words(&folded).into_iter().map(str::to_owned).collect();
        let stems = words.iter().map(|w| stem(w)).collect();
        Self { words, stems }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// A (possibly multi-word) term.
///
/// Literal terms require exact word equality. Inflected terms accept a word
/// that starts with the term word or shares its Spanish stem, so "sintoma"
/// matches "sintomas" and "negro" matches "negra".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    words: Vec<String>,
    stems: Vec<String>,
    inflected: bool,
}

impl Term {
    pub fn new(expression: &str, inflected: bool) -> Self {
        let folded = fold(expression);
        let words: Vec<String> = words(&folded).into_iter().map(str::to_owned).collect();
        let stems = words.iter().map(|w| stem(w)).collect();
        Self {
            words,
            stems,
            inflected,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn is_inflected(&self) -> bool {
        self.inflected
    }

    fn word_matches(&self, k: usize, word: &str, word_stem: &str) -> bool {
        let term = &self.words[k];
        if self.inflected {
            word.starts_with(term.as_str()) || word_stem == self.stems[k]
        } else {
            word == term
        }
    }

    /// Returns the index one past the last matched word if the term matches
    /// starting at word `start`.
    pub fn match_at(&self, text: &Tokenized, start: usize) -> Option<usize> {
        if self.words.is_empty() || start + self.words.len() > text.len() {
            return None;
        }
        let all = (0..self.words.len()).all(|k| self.word_matches(k, &text.words[start + k], &text.stems[start + k]));
        all.then_some(start + self.words.len())
    }

    /// End positions of every match in `text`.
    pub fn find_all<'a>(&'a self, text: &'a Tokenized) -> impl Iterator<Item = usize> + 'a {
        (0..text.len()).filter_map(move |i| self.match_at(text, i))
    }

    pub fn occurs_in(&self, text: &Tokenized) -> bool {
        self.find_all(text).next().is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folding_strips_accents_and_case() {
        assert_eq!(fold("Síntomas LEVES, Ñandú"), "sintomas leves, nandu");
    }

    #[test]
    fn words_split_on_punctuation() {
        assert_eq!(words("covid-19, ¡ya!"), vec!["covid", "19", "ya"]);
    }

    #[test]
    fn inflected_terms_use_prefix_or_stem() {
        let text = Tokenized::new("síntomas leves y una negra de mierda");
        assert!(Term::new("síntoma", true).occurs_in(&text));
        assert!(Term::new("negro", true).occurs_in(&text));
        assert!(!Term::new("negro", false).occurs_in(&text));
        assert!(Term::new("sintomas leves", false).occurs_in(&text));
    }

    #[test]
    fn terms_only_match_at_word_starts() {
        let text = Tokenized::new("anticuarentena");
        assert!(!Term::new("cuarentena", true).occurs_in(&text));
    }
}
