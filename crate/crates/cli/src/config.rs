//! Pipeline configuration file; every field can also be set by a flag.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use ctxhs_core::classifier::{AdaptConfig, EncoderConfig, Task, TrainConfig};
use ctxhs_core::corpus::SamplingConfig;
use ctxhs_core::eval::SplitTargets;
use ctxhs_core::normalize::ContextMode;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub articles: PathBuf,
    pub comments: PathBuf,
    pub sampled: PathBuf,
    pub records: PathBuf,
    pub events: PathBuf,
    pub gold: PathBuf,
    pub lexicon: Option<PathBuf>,
    pub emoji_table: Option<PathBuf>,
    pub task: Task,
    pub mode: ContextMode,
    pub seeds: Vec<u64>,
    pub split_seed: u64,
    /// `tiny` or `base` geometry for encoders built from scratch.
    pub encoder: String,
    pub vocab_size: usize,
    pub sampling: SamplingConfig,
    pub split: SplitTargets,
    pub train: TrainConfig,
    pub adapt: AdaptConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            articles: "data/articles.jsonl".into(),
            comments: "data/comments.jsonl".into(),
            sampled: "data/sampled.jsonl".into(),
            records: "data/records.jsonl".into(),
            events: "data/events.jsonl".into(),
            gold: "data/gold.jsonl".into(),
            lexicon: None,
            emoji_table: None,
            task: Task::Binary,
            mode: ContextMode::Tweet,
            seeds: (1..=10).collect(),
            split_seed: 0,
            encoder: "tiny".into(),
            vocab_size: 30_000,
            sampling: SamplingConfig::default(),
            split: SplitTargets::default(),
            train: TrainConfig::default(),
            adapt: AdaptConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            bail!("seed {dup} listed twice");
        }
        for p in [&self.lexicon, &self.emoji_table].into_iter().flatten() {
            if !p.exists() {
                bail!("{} does not exist", p.display());
            }
        }
        self.encoder_config(1)?;
        Ok(())
    }

    pub fn encoder_config(&self, vocab_size: usize) -> anyhow::Result<EncoderConfig> {
        match self.encoder.as_str() {
            "tiny" => Ok(EncoderConfig::tiny(vocab_size)),
            "base" => Ok(EncoderConfig::base(vocab_size)),
            other => bail!("unknown encoder preset {other:?}; expected tiny or base"),
        }
    }
}
