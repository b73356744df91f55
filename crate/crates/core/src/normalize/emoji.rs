use std::collections::HashMap;
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const VARIATION_SELECTOR: char = '\u{FE0F}';

/// Emoji sequence to name mapping, loaded from a `codepoints<TAB>name` file.
#[derive(Debug, Clone, Default)]
pub struct EmojiTable {
    names: HashMap<String, String>,
    longest: usize,
}

impl EmojiTable {
    pub fn parse_tsv(source: &str) -> Result<Self> {
        let mut table = Self::default();
        for (idx, line) in source.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (codes, name) = line
                .split_once('\t')
                .ok_or_else(|| Error::Config(format!("emoji table line {}: missing tab", idx + 1)))?;
            let mut seq = String::new();
            for code in codes.split_whitespace() {
                let c = u32::from_str_radix(code, 16)
                    .ok()
                    .and_then(char::from_u32)
                    .ok_or_else(|| Error::Config(format!("emoji table line {}: bad codepoint {code}", idx + 1)))?;
                if c != VARIATION_SELECTOR {
                    seq.push(c);
                }
            }
            let name = name.trim().replace('_', " ").to_lowercase();
            if seq.is_empty() || name.is_empty() {
                return Err(Error::Config(format!("emoji table line {}: empty entry", idx + 1)));
            }
            table.longest = table.longest.max(seq.chars().count());
            table.names.insert(seq, name);
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_tsv(&std::fs::read_to_string(path)?)
    }

    /// The table shipped with the crate.
    pub fn bundled() -> &'static Self {
        static TABLE: OnceLock<EmojiTable> = OnceLock::new();
        TABLE.get_or_init(|| Self::parse_tsv(include_str!("../../data/emoji.tsv")).expect("bundled emoji table"))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Longest table entry at the start of `chars` (variation selectors are
    /// ignored). Returns the name and the number of chars consumed.
    pub(crate) fn longest_match(&self, chars: &[char]) -> Option<(&str, usize)> {
        let mut key = String::new();
        let mut best = None;
        let mut used = 0;
        for (i, &c) in chars.iter().enumerate() {
            if c != VARIATION_SELECTOR {
                key.push(c);
                used += 1;
                if used > self.longest {
                    break;
                }
            }
            if let Some(name) = self.names.get(&key) {
                // swallow a trailing variation selector
                let mut end = i + 1;
                if chars.get(end) == Some(&VARIATION_SELECTOR) {
                    end += 1;
                }
                best = Some((name.as_str(), end));
            }
        }
        best
    }
}
