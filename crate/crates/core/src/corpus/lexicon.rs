//! Seed expressions used to flag comments that probably contain slurs.
//!
//! The on-disk format is a tab-separated file, one entry per line:
//!
//! ```text
//! expression <TAB> literal|inflected [<TAB> exclusions] [<TAB> prepositions]
//! ```
//!
//! Exclusions and prepositions are `|`-separated lists. Lines starting with
//! `#` and blank lines are ignored.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fold::{fold, Term, Tokenized};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Literal,
    Inflected,
}

impl FromStr for MatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "literal" => Ok(Self::Literal),
            "inflected" => Ok(Self::Inflected),
            other => Err(Error::Config(format!("unknown match mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub expression: String,
    pub match_mode: MatchMode,
    pub exclusion_terms: Vec<String>,
    pub required_prepositions: Vec<String>,
    term: Term,
    exclusions: Vec<Term>,
}

impl LexiconEntry {
    pub fn new(
        expression: &str,
        match_mode: MatchMode,
        exclusion_terms: &[&str],
        required_prepositions: &[&str],
    ) -> Result<Self> {
        let expression = fold(expression.trim());
        let term = Term::new(&expression, match_mode == MatchMode::Inflected);
        if term.is_empty() {
            return Err(Error::Config("empty lexicon expression".into()));
        }
        let exclusion_terms: Vec<String> = exclusion_terms
            .iter()
            .map(|t| fold(t.trim()))
            .filter(|t| !t.is_empty())
            .collect();
        let exclusions = exclusion_terms.iter().map(|t| Term::new(t, true)).collect();
        let required_prepositions = required_prepositions
            .iter()
            .map(|t| fold(t.trim()))
            .filter(|t| !t.is_empty())
            .collect();
        Ok(Self {
            expression,
            match_mode,
            exclusion_terms,
            required_prepositions,
            term,
            exclusions,
        })
    }

    /// True when the expression occurs (followed by one of the required
    /// prepositions, if any) and none of the exclusion terms does.
    pub fn matches(&self, text: &Tokenized) -> bool {
        if self.exclusions.iter().any(|t| t.occurs_in(text)) {
            return false;
        }
        self.term.find_all(text).any(|end| {
            self.required_prepositions.is_empty()
                || text
                    .words
                    .get(end)
                    .is_some_and(|w| self.required_prepositions.iter().any(|p| p == w))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedLexicon {
    entries: Vec<LexiconEntry>,
}

impl SeedLexicon {
    pub fn new(entries: Vec<LexiconEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Config("seed lexicon is empty".into()));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn parse_tsv(source: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, line) in source.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 2 {
                return Err(Error::Config(format!(
                    "lexicon line {}: expected at least 2 tab-separated fields",
                    idx + 1
                )));
            }
            let list = |i: usize| -> Vec<&str> {
                fields
                    .get(i)
                    .map(|f| f.split('|').filter(|s| !s.trim().is_empty()).collect())
                    .unwrap_or_default()
            };
            let mode: MatchMode = fields[1]
                .parse()
                .map_err(|e| Error::Config(format!("lexicon line {}: {e}", idx + 1)))?;
            entries.push(LexiconEntry::new(fields[0], mode, &list(2), &list(3))?);
        }
        Self::new(entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_tsv(&std::fs::read_to_string(path)?)
    }

    /// The bundled seed list.
    pub fn default_seeds() -> Self {
        Self::parse_tsv(DEFAULT_SEEDS_TSV).expect("bundled seed lexicon is valid")
    }
}

pub const DEFAULT_SEEDS_TSV: &str = include_str!("../../data/seeds.tsv");
