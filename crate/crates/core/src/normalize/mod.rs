//! Tweet text normalization and classifier input assembly.

mod emoji;
mod input;

use std::sync::OnceLock;

use regex::Regex;

pub use emoji::EmojiTable;
pub use input::{build_model_input, truncate_to_budget, ContextMode, ModelInput, Truncation};

use crate::corpus::anonymize;

/// Longest run of one repeated character kept by [`normalize_text`].
pub const MAX_RUN: usize = 3;

pub const LAUGH: &str = "jaja";

/// Normalizes with the bundled emoji table.
pub fn normalize_text(text: &str) -> String {
    normalize_text_with(text, EmojiTable::bundled())
}

/// Applies, in order: repetition capping, laugh normalization, handle
/// replacement, emoji naming and hashtag expansion.
pub fn normalize_text_with(text: &str, emojis: &EmojiTable) -> String {
    let text = cap_runs(text, MAX_RUN);
    let text = normalize_laughs(&text);
    let text = anonymize(&text);
    let text = expand_emojis(&text, emojis);
    expand_hashtags(&text)
}

pub fn cap_runs(text: &str, max: usize) -> String {
    let mut out = String::with_capacity(text.len());
    let mut last = None;
    let mut run = 0;
    for c in text.chars() {
        if Some(c) == last {
            run += 1;
        } else {
            last = Some(c);
            run = 1;
        }
        if run <= max {
            out.push(c);
        }
    }
    out
}

fn laugh_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)[aeiouáéíóú]?(?:j+[aeiouáéíóú]+){2,}j*").expect("laugh regex"))
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Rewrites whole-word "jajaja", "JEJE", "jijiji"... to [`LAUGH`].
pub fn normalize_laughs(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for m in laugh_re().find_iter(text) {
        let before = text[..m.start()].chars().next_back();
        let after = text[m.end()..].chars().next();
        if before.is_some_and(is_word_char) || after.is_some_and(is_word_char) {
            continue;
        }
        out.push_str(&text[last..m.start()]);
        out.push_str(LAUGH);
        last = m.end();
    }
    out.push_str(&text[last..]);
    out
}

/// Appends `word` to `out`, separated from neighbouring text by one space.
fn push_spaced(out: &mut String, word: &str) {
    if !out.is_empty() && !out.ends_with(char::is_whitespace) {
        out.push(' ');
    }
    out.push_str(word);
}

/// Replaces each known emoji with `emoji <name> emoji`.
pub fn expand_emojis(text: &str, table: &EmojiTable) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    let mut i = 0;
    while i < chars.len() {
        if let Some((name, used)) = table.longest_match(&chars[i..]) {
            push_spaced(&mut out, "emoji ");
            out.push_str(name);
            out.push_str(" emoji");
            pending_space = true;
            i += used;
            continue;
        }
        let c = chars[i];
        if pending_space && !c.is_whitespace() {
            out.push(' ');
        }
        pending_space = false;
        out.push(c);
        i += 1;
    }
    out
}

fn hashtag_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"#(\w*[\p{L}\p{N}]\w*)").expect("hashtag regex"))
}

/// Splits a hashtag body at underscores and camel-case boundaries
/// ("VayanseTodos" -> ["Vayanse", "Todos"], "COVIDArgentina" -> ["COVID", "Argentina"]).
pub fn split_camel_case(tag: &str) -> Vec<String> {
    let mut words = Vec::new();
    for part in tag.split('_').filter(|p| !p.is_empty()) {
        let chars: Vec<char> = part.chars().collect();
        let mut current = String::new();
        for (i, &c) in chars.iter().enumerate() {
            let boundary = i > 0 && {
                let prev = chars[i - 1];
                let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
                (c.is_uppercase() && prev.is_lowercase())
                    || (c.is_uppercase() && prev.is_uppercase() && next_lower)
                    || (c.is_numeric() != prev.is_numeric() && (c.is_alphabetic() || prev.is_alphabetic()))
            };
            if boundary && !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
            current.push(c);
        }
        if !current.is_empty() {
            words.push(current);
        }
    }
    words
}

/// `#VayanseTodos` -> `hashtag Vayanse Todos hashtag`. A `#` directly after a
/// word character or another `#` does not start a hashtag.
pub fn expand_hashtags(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for caps in hashtag_re().captures_iter(text) {
        let whole = caps.get(0).expect("match");
        let prev = text[..whole.start()].chars().next_back();
        if prev.is_some_and(|p| p.is_alphanumeric() || p == '_' || p == '#') {
            continue;
        }
        out.push_str(&text[last..whole.start()]);
        push_spaced(&mut out, "hashtag");
        for word in split_camel_case(&caps[1]) {
            out.push(' ');
            // segmentation can expose a laugh hidden behind an underscore
            out.push_str(&normalize_laughs(&word));
        }
        out.push_str(" hashtag");
        last = whole.end();
    }
    out.push_str(&text[last..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(normalize_text("holaaaaa"), "holaaa");
        assert_eq!(normalize_text("plain text"), "plain text");
        assert_eq!(normalize_text("#VayanseTodos"), "hashtag Vayanse Todos hashtag");
    }

    #[test]
    fn laughs() {
        assert_eq!(normalize_text("JAJAJAJA qué risa"), "jaja qué risa");
        assert_eq!(normalize_text("jejeje"), "jaja");
        assert_eq!(normalize_text("ajajajaj"), "jaja");
        assert_eq!(normalize_text("aja, ya entendí"), "aja, ya entendí");
        assert_eq!(normalize_text("jajá"), "jaja");
        assert_eq!(normalize_text("bajaja"), "bajaja");
    }

    #[test]
    fn handles_emojis_and_hashtags_together() {
        assert_eq!(
            normalize_text("@pepe jajaja😂😂 #CuarentenaYa!"),
            "@user jaja emoji cara llorando de risa emoji emoji cara llorando de risa emoji \
             hashtag Cuarentena Ya hashtag!"
        );
        assert_eq!(normalize_text("#cuarentena"), "hashtag cuarentena hashtag");
        assert_eq!(normalize_text("hola#no"), "hola#no");
    }

    #[test]
    fn camel_case_segmentation() {
        assert_eq!(split_camel_case("VayanseTodos"), ["Vayanse", "Todos"]);
        assert_eq!(split_camel_case("COVIDArgentina"), ["COVID", "Argentina"]);
        assert_eq!(split_camel_case("covid19"), ["covid", "19"]);
        assert_eq!(split_camel_case("fuera_todos"), ["fuera", "todos"]);
        assert_eq!(split_camel_case("cuarentena"), ["cuarentena"]);
    }

    fn longest_run(s: &str) -> usize {
        let mut best = 0;
        let mut run = 0;
        let mut last = None;
        for c in s.chars() {
            run = if Some(c) == last { run + 1 } else { 1 };
            last = Some(c);
            best = best.max(run);
        }
        best
    }

    fn noisy_text() -> impl Strategy<Value = String> {
        proptest::collection::vec(
            prop_oneof![
                Just("ja".to_string()),
                Just("je".to_string()),
                Just("@".to_string()),
                Just("#".to_string()),
                Just("😂".to_string()),
                Just("❤️".to_string()),
                Just(" ".to_string()),
                Just("_".to_string()),
                "[a-zA-Zá0-9]{1,4}",
                "[aaaa!!!???]{1,6}",
                "\\PC",
            ],
            0..24,
        )
        .prop_map(|parts| parts.concat())
    }

    proptest! {
        #[test]
        fn idempotent(text in noisy_text()) {
            let once = normalize_text(&text);
            prop_assert_eq!(normalize_text(&once), once);
        }

        #[test]
        fn no_run_longer_than_three(text in noisy_text()) {
            prop_assert!(longest_run(&normalize_text(&text)) <= MAX_RUN);
        }
    }
}
