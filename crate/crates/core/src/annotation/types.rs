use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Protected characteristic attacked by a hateful message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Characteristic {
    Women,
    Lgbti,
    Racism,
    Class,
    Politics,
    Appearance,
    Criminal,
    Disabled,
}

impl Characteristic {
    pub const ALL: [Characteristic; 8] = [
        Characteristic::Women,
        Characteristic::Lgbti,
        Characteristic::Racism,
        Characteristic::Class,
        Characteristic::Politics,
        Characteristic::Appearance,
        Characteristic::Criminal,
        Characteristic::Disabled,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Characteristic::Women => "WOMEN",
            Characteristic::Lgbti => "LGBTI",
            Characteristic::Racism => "RACISM",
            Characteristic::Class => "CLASS",
            Characteristic::Politics => "POLITICS",
            Characteristic::Appearance => "APPEARANCE",
            Characteristic::Criminal => "CRIMINAL",
            Characteristic::Disabled => "DISABLED",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).expect("listed")
    }
}

impl fmt::Display for Characteristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Characteristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Validation(format!("unknown characteristic {s:?}")))
    }
}

/// Names of the fine-grained output coordinates, in label-vector order.
pub const LABEL_NAMES: [&str; 9] = [
    "CALLS",
    "WOMEN",
    "LGBTI",
    "RACISM",
    "CLASS",
    "POLITICS",
    "DISABLED",
    "APPEARANCE",
    "CRIMINAL",
];

/// Characteristics in label-vector order (coordinates 1..=8).
pub const LABEL_CHARACTERISTICS: [Characteristic; 8] = [
    Characteristic::Women,
    Characteristic::Lgbti,
    Characteristic::Racism,
    Characteristic::Class,
    Characteristic::Politics,
    Characteristic::Disabled,
    Characteristic::Appearance,
    Characteristic::Criminal,
];

/// One annotator's judgment of one comment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub annotator_id: String,
    pub comment_id: String,
    pub hateful: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calls_to_action: Option<bool>,
    #[serde(default)]
    pub characteristics: BTreeSet<Characteristic>,
    #[serde(default)]
    pub submitted_at: String,
}

impl AnnotationRecord {
    pub fn not_hateful(annotator_id: &str, comment_id: &str) -> Self {
        Self {
            annotator_id: annotator_id.into(),
            comment_id: comment_id.into(),
            hateful: false,
            calls_to_action: None,
            characteristics: BTreeSet::new(),
            submitted_at: String::new(),
        }
    }

    pub fn hateful(
        annotator_id: &str,
        comment_id: &str,
        calls: bool,
        characteristics: impl IntoIterator<Item = Characteristic>,
    ) -> Self {
        Self {
            annotator_id: annotator_id.into(),
            comment_id: comment_id.into(),
            hateful: true,
            calls_to_action: Some(calls),
            characteristics: characteristics.into_iter().collect(),
            submitted_at: String::new(),
        }
    }

    /// Hierarchy check: extra fields exist exactly when the comment is hateful.
    pub fn validate(&self) -> Result<()> {
        if self.annotator_id.is_empty() || self.comment_id.is_empty() {
            return Err(Error::Validation("annotator_id and comment_id are required".into()));
        }
        if self.hateful {
            if self.characteristics.is_empty() {
                return Err(Error::Validation(
                    "a hateful comment needs at least one characteristic".into(),
                ));
            }
            if self.calls_to_action.is_none() {
                return Err(Error::Validation(
                    "a hateful comment needs a calls-to-action answer".into(),
                ));
            }
        } else {
            if !self.characteristics.is_empty() {
                return Err(Error::Validation(
                    "a non-hateful comment cannot carry characteristics".into(),
                ));
            }
            if self.calls_to_action.is_some() {
                return Err(Error::Validation(
                    "a non-hateful comment cannot carry a calls-to-action answer".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Pass {
    First,
    Third,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pending,
    Done,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub article_id: String,
    pub annotator_id: String,
    pub pass: Pass,
    pub status: Status,
}

/// Aggregated label of one comment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabel {
    pub comment_id: String,
    pub hateful: bool,
    pub calls_to_action: bool,
    #[serde(default)]
    pub characteristics: BTreeSet<Characteristic>,
}

impl GoldLabel {
    /// `[CALLS, WOMEN, LGBTI, RACISM, CLASS, POLITICS, DISABLED, APPEARANCE, CRIMINAL]`.
    pub fn label_vector(&self) -> [u8; 9] {
        let mut y = [0u8; 9];
        if self.hateful {
            y[0] = u8::from(self.calls_to_action);
            for (i, c) in LABEL_CHARACTERISTICS.iter().enumerate() {
                y[i + 1] = u8::from(self.characteristics.contains(c));
            }
        }
        y
    }

    pub fn check(&self) -> Result<()> {
        if !self.hateful && (self.calls_to_action || !self.characteristics.is_empty()) {
            return Err(Error::Validation(format!(
                "gold label for {} is not hateful but carries labels",
                self.comment_id
            )));
        }
        Ok(())
    }
}

/// Export row for `gold.jsonl`: the gold label plus its label vector.
#[derive(Debug, Serialize)]
pub struct GoldExport<'a> {
    #[serde(flatten)]
    pub gold: &'a GoldLabel,
    pub labels: [u8; 9],
}

impl<'a> From<&'a GoldLabel> for GoldExport<'a> {
    fn from(gold: &'a GoldLabel) -> Self {
        Self {
            gold,
            labels: gold.label_vector(),
        }
    }
}
