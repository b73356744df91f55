//! Task selection and optimizer settings.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normalize::ContextMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Hateful or not.
    Binary,
    /// Calls to action plus the eight characteristics.
    FineGrained,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Binary, Task::FineGrained];

    pub fn output_dim(self) -> usize {
        match self {
            Task::Binary => 1,
            Task::FineGrained => super::loss::LABEL_DIM,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Binary => "binary",
            Task::FineGrained => "fine_grained",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Task::Binary),
            "fine_grained" | "fine-grained" => Ok(Task::FineGrained),
            other => Err(Error::Config(format!("unknown task {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: String,
    pub weight_decay: f64,
    pub peak_lr: f64,
    pub warmup_fraction: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub selection_metric: String,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: "adamw".into(),
            weight_decay: 0.1,
            peak_lr: 5e-5,
            warmup_fraction: 0.10,
            batch_size: 32,
            epochs: 5,
            selection_metric: "dev_f1".into(),
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            threshold: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.optimizer != "adamw" {
            return Err(Error::Config(format!("unsupported optimizer {:?}", self.optimizer)));
        }
        if self.selection_metric != "dev_f1" {
            return Err(Error::Config(format!(
                "unsupported selection_metric {:?}",
                self.selection_metric
            )));
        }
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0) {
            return Err(Error::Config(format!(
                "warmup_fraction must lie in (0, 1), got {}",
                self.warmup_fraction
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be at least 1".into()));
        }
        if !(self.peak_lr.is_finite() && self.peak_lr > 0.0) || !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config("peak_lr must be positive and threshold in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub max_seq_len: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    pub peak_lr: f64,
    pub warmup_ratio: f64,
    pub mask_prob: f64,
    pub seed: u64,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            steps: 10_000,
            batch_size: 2048,
            max_seq_len: ContextMode::None.max_tokens(),
            beta1: 0.9,
            beta2: 0.98,
            epsilon: 1e-6,
            weight_decay: 0.01,
            peak_lr: 4e-4,
            warmup_ratio: 0.1,
            mask_prob: 0.15,
            seed: 0,
        }
    }
}

impl AdaptConfig {
    pub fn for_mode(mode: ContextMode) -> Self {
        Self {
            max_seq_len: mode.max_tokens(),
            ..Self::default()
        }
    }

    pub fn validate(&self, mode: ContextMode) -> Result<()> {
        if self.max_seq_len != mode.max_tokens() {
            return Err(Error::Config(format!(
                "max_seq_len {} does not match the {mode} budget of {}",
                self.max_seq_len,
                mode.max_tokens()
            )));
        }
        if self.steps == 0 || self.batch_size == 0 {
            return Err(Error::Config("steps and batch_size must be at least 1".into()));
        }
        if !(self.warmup_ratio > 0.0 && self.warmup_ratio < 1.0) {
            return Err(Error::Config(format!(
                "warmup_ratio must lie in (0, 1), got {}",
                self.warmup_ratio
            )));
        }
        if !(self.mask_prob > 0.0 && self.mask_prob < 1.0) {
            return Err(Error::Config(format!(
                "mask_prob must lie in (0, 1), got {}",
                self.mask_prob
            )));
        }
        Ok(())
    }
}

/// Linear warmup to `peak` over the first `warmup` steps, then linear decay
/// to zero at `total`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSchedule {
    pub peak: f64,
    pub warmup: usize,
    pub total: usize,
}

impl LinearSchedule {
    pub fn new(peak: f64, warmup_fraction: f64, total: usize) -> Self {
        let warmup = ((total as f64 * warmup_fraction).round() as usize).clamp(1, total.max(1));
        Self { peak, warmup, total }
    }

    pub fn lr(&self, step: usize) -> f64 {
        if step < self.warmup {
            self.peak * step as f64 / self.warmup as f64
        } else if self.total <= self.warmup {
            self.peak
        } else {
            let left = self.total.saturating_sub(step) as f64;
            self.peak * left / (self.total - self.warmup) as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
        for m in ContextMode::ALL {
            AdaptConfig::for_mode(m).validate(m).unwrap();
        }
        assert!(AdaptConfig::for_mode(ContextMode::Tweet)
            .validate(ContextMode::Full)
            .is_err());
        let bad = TrainConfig {
            warmup_fraction: 1.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!("multi".parse::<Task>().is_err());
        assert_eq!("fine_grained".parse::<Task>().unwrap().output_dim(), 9);
    }

    #[test]
    fn toml_roundtrip() {
        let cfg = TrainConfig {
            seed: 7,
            ..TrainConfig::default()
        };
        let text = toml::to_string(&cfg).unwrap();
        assert!(text.lines().any(|l| l.starts_with("peak_lr = ")));
        assert_eq!(toml::from_str::<TrainConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn schedule_shape() {
        let s = LinearSchedule::new(5e-5, 0.1, 100);
        assert_eq!(s.warmup, 10);
        assert_eq!(s.lr(0), 0.0);
        assert!((s.lr(5) - 2.5e-5).abs() < 1e-18);
        assert!((s.lr(10) - 5e-5).abs() < 1e-18);
        assert!((s.lr(55) - 2.5e-5).abs() < 1e-18);
        assert_eq!(s.lr(100), 0.0);
        for w in (0..100).collect::<Vec<_>>().windows(2) {
            if w[1] <= 10 {
                assert!(s.lr(w[1]) >= s.lr(w[0]));
            } else {
                assert!(s.lr(w[1]) <= s.lr(w[0]));
            }
        }
    }
}
