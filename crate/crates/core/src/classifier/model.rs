//! Classification heads over the shared encoder, plus checkpoint I/O.

use std::collections::BTreeMap;
use std::path::Path;

use candle_core::Tensor;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Task, TrainConfig};
use super::encoder::{head, Batch, Encoder, EncoderConfig, Head};
use super::params::ParamStore;
use super::tokenizer::{Encoding, Tokenizer};
use crate::error::{Error, Result};
use crate::normalize::{ContextMode, ModelInput};

pub const ENCODER_PREFIX: &str = "encoder.";
pub const HEAD_PREFIX: &str = "head.";

pub const WEIGHTS_FILE: &str = "weights.safetensors";
pub const CONFIG_FILE: &str = "config.toml";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const HISTORY_FILE: &str = "history.json";
pub const ENCODER_WEIGHTS_FILE: &str = "encoder.safetensors";
pub const ENCODER_CONFIG_FILE: &str = "encoder.toml";

const PREDICT_BATCH: usize = 64;

/// An encoder's weights with everything needed to rebuild it.
#[derive(Debug, Clone)]
pub struct EncoderCheckpoint {
    pub config: EncoderConfig,
    pub tokenizer: Tokenizer,
    pub mode: ContextMode,
    /// Parameters keyed with the `encoder.` prefix; empty for a fresh encoder.
    pub weights: BTreeMap<String, Tensor>,
}

#[derive(Serialize, Deserialize)]
struct EncoderFile {
    mode: ContextMode,
    encoder: EncoderConfig,
}

impl EncoderCheckpoint {
    /// Randomly initialized encoder; parameters are drawn when a model is built.
    pub fn fresh(config: EncoderConfig, tokenizer: Tokenizer, mode: ContextMode) -> Result<Self> {
        if config.vocab_size != tokenizer.vocab_size() {
            return Err(Error::DimensionMismatch {
                expected: tokenizer.vocab_size(),
                got: config.vocab_size,
            });
        }
        config.validate()?;
        Ok(Self {
            config,
            tokenizer,
            mode,
            weights: BTreeMap::new(),
        })
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let tensors: std::collections::HashMap<String, Tensor> =
            self.weights.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        candle_core::safetensors::save(&tensors, dir.join(ENCODER_WEIGHTS_FILE))?;
        let file = EncoderFile {
            mode: self.mode,
            encoder: self.config.clone(),
        };
        std::fs::write(dir.join(ENCODER_CONFIG_FILE), toml::to_string(&file)?)?;
        self.tokenizer.save(dir.join(VOCAB_FILE))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let file: EncoderFile = toml::from_str(&std::fs::read_to_string(dir.join(ENCODER_CONFIG_FILE))?)?;
        let tokenizer = Tokenizer::load(dir.join(VOCAB_FILE))?;
        let mut ckpt = Self::fresh(file.encoder, tokenizer, file.mode)?;
        ckpt.weights = ParamStore::read(dir.join(ENCODER_WEIGHTS_FILE))?;
        Ok(ckpt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probs: Vec<f64>,
    pub labels: Vec<u8>,
}

impl Prediction {
    pub fn from_probs(probs: Vec<f64>, threshold: f64) -> Self {
        let labels = probs.iter().map(|&p| u8::from(p >= threshold)).collect();
        Self { probs, labels }
    }

    pub fn is_positive(&self) -> bool {
        self.labels.first() == Some(&1)
    }
}

/// The configuration snapshot stored next to trained weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: Task,
    pub mode: ContextMode,
    pub train: TrainConfig,
    pub encoder: EncoderConfig,
}

#[derive(Debug)]
pub struct Classifier {
    store: ParamStore,
    encoder: Encoder,
    head: Head,
    task: Task,
    mode: ContextMode,
    tokenizer: Tokenizer,
}

impl Classifier {
    /// Attaches a `task` head to `encoder`. All outputs share the one encoder.
    pub fn build(encoder: &EncoderCheckpoint, task: Task, seed: u64) -> Result<Self> {
        let mut store = ParamStore::new(seed);
        store.preload(encoder.weights.clone())?;
        Self::assemble(store, &encoder.config, encoder.tokenizer.clone(), task, encoder.mode)
    }

    fn assemble(
        mut store: ParamStore,
        cfg: &EncoderConfig,
        tokenizer: Tokenizer,
        task: Task,
        mode: ContextMode,
    ) -> Result<Self> {
        if cfg.max_positions < mode.max_tokens() {
            return Err(Error::Config(format!(
                "encoder has {} positions, {mode} inputs need {}",
                cfg.max_positions,
                mode.max_tokens()
            )));
        }
        let encoder = Encoder::new(&mut store, ENCODER_PREFIX, cfg)?;
        let head = head(&mut store, "head.out", cfg.hidden_size, task.output_dim(), cfg.init_std)?;
        Ok(Self {
            store,
            encoder,
            head,
            task,
            mode,
            tokenizer,
        })
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn mode(&self) -> ContextMode {
        self.mode
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn encoder_config(&self) -> &EncoderConfig {
        self.encoder.config()
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn encoder_param_count(&self) -> usize {
        self.store.num_params(ENCODER_PREFIX)
    }

    pub fn head_param_count(&self) -> usize {
        self.store.num_params(HEAD_PREFIX)
    }

    pub(crate) fn check_mode(&self, input: &ModelInput) -> Result<()> {
        if input.mode != self.mode {
            return Err(Error::ModeMismatch {
                model: self.mode.to_string(),
                input: input.mode.to_string(),
            });
        }
        Ok(())
    }

    pub fn encode(&self, inputs: &[ModelInput]) -> Result<Vec<Encoding>> {
        inputs
            .iter()
            .map(|i| {
                self.check_mode(i)?;
                Ok(self.tokenizer.encode(i))
            })
            .collect()
    }

    /// Pre-sigmoid scores `[batch, d]`.
    pub(crate) fn logits(&self, encodings: &[&Encoding], rng: Option<&mut ChaCha8Rng>) -> Result<Tensor> {
        let batch = Batch::new(encodings, self.store.device())?;
        let cls = self.encoder.cls(&batch, rng)?;
        self.head.forward(&cls)
    }

    pub(crate) fn probs_of(&self, encodings: &[Encoding]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(encodings.len());
        for chunk in encodings.chunks(PREDICT_BATCH) {
            let refs: Vec<&Encoding> = chunk.iter().collect();
            let probs = candle_nn::ops::sigmoid(&self.logits(&refs, None)?)?;
            for row in probs.to_vec2::<f32>()? {
                out.push(row.into_iter().map(f64::from).collect());
            }
        }
        Ok(out)
    }

    /// One prediction per input, in order; labels are `probs >= threshold`.
    pub fn predict(&self, inputs: &[ModelInput], threshold: f64) -> Result<Vec<Prediction>> {
        let encodings = self.encode(inputs)?;
        Ok(self
            .probs_of(&encodings)?
            .into_iter()
            .map(|p| Prediction::from_probs(p, threshold))
            .collect())
    }

    /// Current encoder weights, e.g. to reuse after fine-tuning.
    pub fn encoder_checkpoint(&self) -> Result<EncoderCheckpoint> {
        let weights = self
            .store
            .snapshot()?
            .into_iter()
            .filter(|(k, _)| k.starts_with(ENCODER_PREFIX))
            .collect();
        Ok(EncoderCheckpoint {
            config: self.encoder.config().clone(),
            tokenizer: self.tokenizer.clone(),
            mode: self.mode,
            weights,
        })
    }

    /// Writes weights, vocabulary and the config snapshot into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>, train: &TrainConfig) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.store.save(dir.join(WEIGHTS_FILE), "")?;
        self.tokenizer.save(dir.join(VOCAB_FILE))?;
        let cfg = RunConfig {
            task: self.task,
            mode: self.mode,
            train: train.clone(),
            encoder: self.encoder.config().clone(),
        };
        std::fs::write(dir.join(CONFIG_FILE), toml::to_string(&cfg)?)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<(Self, RunConfig)> {
        let dir = dir.as_ref();
        let cfg: RunConfig = toml::from_str(&std::fs::read_to_string(dir.join(CONFIG_FILE))?)?;
        let tokenizer = Tokenizer::load(dir.join(VOCAB_FILE))?;
        let weights = ParamStore::read(dir.join(WEIGHTS_FILE))?;
        let expected = weights.len();
        let mut store = ParamStore::new(cfg.train.seed);
        store.preload(weights)?;
        let model = Self::assemble(store, &cfg.encoder, tokenizer, cfg.task, cfg.mode)?;
        let registered = model.store.names().count();
        if registered != expected {
            return Err(Error::Validation(format!(
                "{}: checkpoint holds {expected} tensors, model needs {registered}",
                dir.display()
            )));
        }
        Ok((model, cfg))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encoder(mode: ContextMode) -> EncoderCheckpoint {
        let tok = Tokenizer::train(["hola mundo", "chau mundo cruel"], 50, 1);
        let cfg = EncoderConfig::tiny(tok.vocab_size());
        EncoderCheckpoint::fresh(cfg, tok, mode).unwrap()
    }

    #[test]
    fn head_shapes_and_shared_encoder() {
        let enc = encoder(ContextMode::Tweet);
        let b = Classifier::build(&enc, Task::Binary, 1).unwrap();
        let f = Classifier::build(&enc, Task::FineGrained, 1).unwrap();
        assert_eq!(b.encoder_param_count(), f.encoder_param_count());
        assert_eq!(f.head_param_count(), 9 * 64 + 9);
        assert_eq!(b.head_param_count(), 64 + 1);
        let input = ModelInput {
            text_a: "hola".into(),
            text_b: "mundo".into(),
            mode: ContextMode::Tweet,
        };
        assert_eq!(b.predict(std::slice::from_ref(&input), 0.5).unwrap()[0].probs.len(), 1);
        let preds = f.predict(&[input.clone(), input], 0.5).unwrap();
        assert_eq!(preds.len(), 2);
        assert_eq!(preds[0].probs.len(), 9);
        assert_eq!(preds[0], preds[1]);
    }

    #[test]
    fn threshold_is_inclusive() {
        let p = Prediction::from_probs(vec![0.5, 0.4999], 0.5);
        assert_eq!(p.labels, vec![1, 0]);
        assert!(p.is_positive());
    }

    #[test]
    fn mode_mismatch() {
        let m = Classifier::build(&encoder(ContextMode::None), Task::Binary, 0).unwrap();
        let input = ModelInput {
            text_a: "hola".into(),
            text_b: "mundo".into(),
            mode: ContextMode::Tweet,
        };
        assert!(matches!(m.predict(&[input], 0.5), Err(Error::ModeMismatch { .. })));
    }

    #[test]
    fn none_mode_ignores_context() {
        let m = Classifier::build(&encoder(ContextMode::None), Task::Binary, 0).unwrap();
        let mut input = ModelInput::comment_only("chau mundo");
        let bare = m.predict(std::slice::from_ref(&input), 0.5).unwrap();
        input.text_a = "hola mundo cruel".into();
        assert_eq!(m.predict(&[input], 0.5).unwrap(), bare);
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let m = Classifier::build(&encoder(ContextMode::Full), Task::FineGrained, 4).unwrap();
        m.save(dir.path(), &TrainConfig::default()).unwrap();
        let (back, cfg) = Classifier::load(dir.path()).unwrap();
        assert_eq!(cfg.task, Task::FineGrained);
        assert_eq!(cfg.mode, ContextMode::Full);
        let input = ModelInput {
            text_a: "hola mundo".into(),
            text_b: "cruel".into(),
            mode: ContextMode::Full,
        };
        assert_eq!(
            m.predict(std::slice::from_ref(&input), 0.5).unwrap(),
            back.predict(&[input], 0.5).unwrap()
        );

        let ckpt = m.encoder_checkpoint().unwrap();
        ckpt.save(dir.path().join("enc")).unwrap();
        let ckpt = EncoderCheckpoint::load(dir.path().join("enc")).unwrap();
        let rebuilt = Classifier::build(&ckpt, Task::Binary, 9).unwrap();
        assert_eq!(rebuilt.encoder_param_count(), m.encoder_param_count());
    }
}
