//! Fine-tuning loop with per-epoch dev selection.

use candle_core::{Tensor, Var};
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{LinearSchedule, Task, TrainConfig};
use super::encoder::f32_scalar;
use super::loss::bce_tensor;
use super::model::{Classifier, Prediction};
use super::params::ParamStore;
use super::tokenizer::Encoding;
use crate::error::{Error, Result};
use crate::eval::{binary_metrics, finegrained_metrics, HATEFUL};
use crate::normalize::ModelInput;

/// A model input with its target vector (length 1 or 9).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub input: ModelInput,
    pub target: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_f1: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub best_dev_f1: f64,
    pub total_steps: usize,
    pub warmup_steps: usize,
}

/// Separate groups so biases and norms skip weight decay.
pub(crate) struct Optimizers {
    groups: Vec<AdamW>,
}

impl Optimizers {
    pub(crate) fn new(store: &ParamStore, prefixes: &[&str], params: ParamsAdamW) -> Result<Self> {
        let names: Vec<String> = store.names().map(str::to_string).collect();
        let vars = store.vars();
        let (mut decay, mut plain): (Vec<Var>, Vec<Var>) = (Vec::new(), Vec::new());
        for (name, var) in names.iter().zip(vars) {
            if !prefixes.iter().any(|p| name.starts_with(p)) {
                continue;
            }
            if name.ends_with(".bias") || name.contains(".ln.") {
                plain.push(var);
            } else {
                decay.push(var);
            }
        }
        let groups = vec![
            AdamW::new(decay, params.clone())?,
            AdamW::new(
                plain,
                ParamsAdamW {
                    weight_decay: 0.0,
                    ..params
                },
            )?,
        ];
        Ok(Self { groups })
    }

    pub(crate) fn step(&mut self, loss: &Tensor, lr: f64) -> Result<()> {
        let grads = loss.backward()?;
        for opt in &mut self.groups {
            opt.set_learning_rate(lr);
            opt.step(&grads)?;
        }
        Ok(())
    }
}

/// Seeds for the independent random streams of one run.
pub(crate) fn stream(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt)
}

/// Dev score used for checkpoint selection, in percentage points.
pub fn selection_f1(task: Task, preds: &[Prediction], golds: &[Vec<f32>]) -> Result<f64> {
    match task {
        Task::Binary => {
            let p: Vec<bool> = preds.iter().map(Prediction::is_positive).collect();
            let g: Vec<bool> = golds.iter().map(|t| t[0] >= 0.5).collect();
            Ok(binary_metrics(&p, &g, 0)?.label(HATEFUL).map_or(0.0, |s| s.f1))
        }
        Task::FineGrained => {
            let p: Vec<&[u8]> = preds.iter().map(|p| p.labels.as_slice()).collect();
            let g: Vec<Vec<u8>> = golds
                .iter()
                .map(|t| t.iter().map(|&v| u8::from(v >= 0.5)).collect())
                .collect();
            Ok(finegrained_metrics(&p, &g, 0)?.macro_f1)
        }
    }
}

fn check_examples(model: &Classifier, set: &[Example], name: &str) -> Result<Vec<Encoding>> {
    if set.is_empty() {
        return Err(Error::InsufficientData(format!("{name} set is empty")));
    }
    let dim = model.task().output_dim();
    for ex in set {
        if ex.target.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: ex.target.len(),
            });
        }
    }
    let inputs: Vec<ModelInput> = set.iter().map(|e| e.input.clone()).collect();
    model.encode(&inputs)
}

/// Fine-tunes `model` in place and leaves it holding the weights of the epoch
/// with the best dev F1 (earliest on ties).
pub fn train(model: &mut Classifier, train_set: &[Example], dev_set: &[Example], cfg: &TrainConfig) -> Result<History> {
    cfg.validate()?;
    let train_enc = check_examples(model, train_set, "train")?;
    let dev_enc = check_examples(model, dev_set, "dev")?;
    let dev_targets: Vec<Vec<f32>> = dev_set.iter().map(|e| e.target.clone()).collect();

    let steps_per_epoch = train_set.len().div_ceil(cfg.batch_size);
    let schedule = LinearSchedule::new(cfg.peak_lr, cfg.warmup_fraction, steps_per_epoch * cfg.epochs);
    let mut opt = Optimizers::new(
        model.params(),
        &[""],
        ParamsAdamW {
            lr: 0.0,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.epsilon,
            weight_decay: cfg.weight_decay,
        },
    )?;
    let mut order_rng = stream(cfg.seed, 1);
    let mut dropout_rng = stream(cfg.seed, 2);
    let dim = model.task().output_dim();
    let device = model.params().device().clone();

    let mut history = History {
        epochs: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
        best_dev_f1: f64::NEG_INFINITY,
        total_steps: schedule.total,
        warmup_steps: schedule.warmup,
    };
    let mut best = None;
    let mut step = 0;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut order_rng);
        let mut loss_sum = 0.0;
        let mut lr = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let encs: Vec<&Encoding> = idx.iter().map(|&i| &train_enc[i]).collect();
            let targets: Vec<f32> = idx.iter().flat_map(|&i| train_set[i].target.iter().copied()).collect();
            let targets = Tensor::from_vec(targets, (idx.len(), dim), &device)?;
            let logits = model.logits(&encs, Some(&mut dropout_rng))?;
            let loss = bce_tensor(&candle_nn::ops::sigmoid(&logits)?, &targets)?;
            let value = f32_scalar(&loss)?;
            if !value.is_finite() {
                log::error!("epoch {epoch} step {step}: loss {value}; aborting");
                return Err(Error::NonFiniteLoss { step, value });
            }
            lr = schedule.lr(step);
            opt.step(&loss, lr)?;
            loss_sum += value * idx.len() as f64;
            step += 1;
        }
        let preds: Vec<Prediction> = model
            .probs_of(&dev_enc)?
            .into_iter()
            .map(|p| Prediction::from_probs(p, cfg.threshold))
            .collect();
        let dev_f1 = selection_f1(model.task(), &preds, &dev_targets)?;
        let train_loss = loss_sum / train_set.len() as f64;
        log::info!("epoch {epoch}: train loss {train_loss:.4}, dev F1 {dev_f1:.2}");
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            dev_f1,
            lr,
        });
        if dev_f1 > history.best_dev_f1 {
            history.best_dev_f1 = dev_f1;
            history.best_epoch = epoch;
            best = Some(model.params().snapshot()?);
        }
    }
    if let Some(best) = best {
        model.params().restore(&best)?;
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{EncoderCheckpoint, EncoderConfig, Tokenizer};
    use crate::normalize::ContextMode;

    fn toy() -> (EncoderCheckpoint, Vec<Example>) {
        let examples: Vec<Example> = (0..64)
            .map(|i| {
                let hot = i % 2 == 0;
                Example {
                    input: ModelInput {
                        text_a: if hot { "rojo" } else { "azul" }.into(),
                        text_b: format!("comentario {}", i % 5),
                        mode: ContextMode::Tweet,
                    },
                    target: vec![f32::from(u8::from(hot))],
                }
            })
            .collect();
        let tok = Tokenizer::train(
            examples
                .iter()
                .flat_map(|e| [e.input.text_a.as_str(), e.input.text_b.as_str()]),
            100,
            1,
        );
        let cfg = EncoderConfig {
            dropout: 0.0,
            ..EncoderConfig::tiny(tok.vocab_size())
        };
        (
            EncoderCheckpoint::fresh(cfg, tok, ContextMode::Tweet).unwrap(),
            examples,
        )
    }

    fn fast() -> TrainConfig {
        TrainConfig {
            peak_lr: 1e-3,
            batch_size: 16,
            epochs: 3,
            seed: 5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn learns_context_keyword_and_reports_every_epoch() {
        let (enc, ex) = toy();
        let mut m = Classifier::build(&enc, Task::Binary, 5).unwrap();
        let cfg = TrainConfig { epochs: 6, ..fast() };
        let h = train(&mut m, &ex, &ex, &cfg).unwrap();
        assert_eq!(h.epochs.len(), 6);
        assert!(h.best_dev_f1 >= 99.0, "{h:?}");
        let best = h.epochs.iter().map(|e| e.dev_f1).fold(f64::MIN, f64::max);
        let first_best = h.epochs.iter().find(|e| e.dev_f1 == best).unwrap().epoch;
        assert_eq!(h.best_epoch, first_best);
        // restored weights reproduce the selected dev score
        let inputs: Vec<_> = ex.iter().map(|e| e.input.clone()).collect();
        let preds = m.predict(&inputs, 0.5).unwrap();
        let targets: Vec<_> = ex.iter().map(|e| e.target.clone()).collect();
        assert_eq!(selection_f1(Task::Binary, &preds, &targets).unwrap(), h.best_dev_f1);
    }

    #[test]
    fn bit_reproducible() {
        let (enc, ex) = toy();
        let mut enc = enc;
        enc.config.dropout = 0.1;
        let run = || {
            let mut m = Classifier::build(&enc, Task::FineGrained, 3).unwrap();
            let ex: Vec<Example> = ex
                .iter()
                .map(|e| Example {
                    input: e.input.clone(),
                    target: vec![e.target[0]; 9],
                })
                .collect();
            let h = train(&mut m, &ex, &ex[..10], &fast()).unwrap();
            let inputs: Vec<_> = ex.iter().map(|e| e.input.clone()).collect();
            (h, m.predict(&inputs, 0.5).unwrap())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rejects_bad_sets() {
        let (enc, ex) = toy();
        let mut m = Classifier::build(&enc, Task::Binary, 0).unwrap();
        assert!(matches!(
            train(&mut m, &[], &ex, &fast()),
            Err(Error::InsufficientData(_))
        ));
        let wide = vec![Example {
            input: ex[0].input.clone(),
            target: vec![0.0; 9],
        }];
        assert!(matches!(
            train(&mut m, &wide, &ex, &fast()),
            Err(Error::DimensionMismatch { .. })
        ));
        let none = vec![Example {
            input: ModelInput::comment_only("x"),
            target: vec![0.0],
        }];
        assert!(matches!(
            train(&mut m, &none, &ex, &fast()),
            Err(Error::ModeMismatch { .. })
        ));
    }
}
