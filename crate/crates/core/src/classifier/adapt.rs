//! Continued masked-language-model pretraining on in-domain text.

use candle_core::Tensor;
use candle_nn::ParamsAdamW;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{AdaptConfig, LinearSchedule};
use super::encoder::{f32_scalar, gelu, head, layer_norm, Batch, Encoder, Head, Norm};
use super::model::{EncoderCheckpoint, ENCODER_PREFIX};
use super::params::{Init, ParamStore};
use super::tokenizer::{Encoding, MASK, SPECIALS};
use super::train::{stream, Optimizers};
use crate::error::{Error, Result};
use crate::normalize::ModelInput;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptOutcome {
    /// Masked-token cross-entropy per step.
    pub losses: Vec<f64>,
}

struct MlmHead {
    transform: Head,
    norm: Norm,
    bias: Tensor,
}

/// Replaces ~`prob` of the non-special tokens: 80% by [MASK], 10% by a random
/// token, 10% unchanged. Returns flat positions and original ids. At least
/// one position is always selected.
pub fn mask_tokens<R: Rng>(
    encodings: &mut [Encoding],
    prob: f64,
    vocab_size: usize,
    rng: &mut R,
) -> (Vec<u32>, Vec<u32>) {
    let width = encodings.iter().map(Encoding::len).max().unwrap_or(0);
    let first_special = SPECIALS.len() as u32;
    let mut positions = Vec::new();
    let mut targets = Vec::new();
    let mut fallback = None;
    for (row, enc) in encodings.iter_mut().enumerate() {
        for (col, id) in enc.ids.iter_mut().enumerate() {
            if *id < first_special {
                continue;
            }
            fallback.get_or_insert((row, col));
            if rng.random::<f64>() >= prob {
                continue;
            }
            positions.push((row * width + col) as u32);
            targets.push(*id);
            let r: f64 = rng.random();
            if r < 0.8 {
                *id = MASK;
            } else if r < 0.9 && vocab_size as u32 > first_special {
                *id = rng.random_range(first_special..vocab_size as u32);
            }
        }
    }
    if positions.is_empty() {
        if let Some((row, col)) = fallback {
            positions.push((row * width + col) as u32);
            targets.push(encodings[row].ids[col]);
            encodings[row].ids[col] = MASK;
        }
    }
    (positions, targets)
}

/// Runs `cfg.steps` masked-LM updates on `corpus`, starting from `start`, and
/// returns the adapted encoder with its loss curve.
pub fn domain_adapt(
    corpus: &[ModelInput],
    start: &EncoderCheckpoint,
    cfg: &AdaptConfig,
) -> Result<(EncoderCheckpoint, AdaptOutcome)> {
    cfg.validate(start.mode)?;
    if corpus.len() < cfg.batch_size {
        return Err(Error::InsufficientData(format!(
            "corpus has {} texts, one batch needs {}",
            corpus.len(),
            cfg.batch_size
        )));
    }
    if let Some(bad) = corpus.iter().find(|i| i.mode != start.mode) {
        return Err(Error::ModeMismatch {
            model: start.mode.to_string(),
            input: bad.mode.to_string(),
        });
    }

    let mut store = ParamStore::new(cfg.seed);
    store.preload(start.weights.clone())?;
    let encoder = Encoder::new(&mut store, ENCODER_PREFIX, &start.config)?;
    let h = start.config.hidden_size;
    let mlm = MlmHead {
        transform: head(&mut store, "mlm.transform", h, h, start.config.init_std)?,
        norm: layer_norm(&mut store, "mlm.ln", h, start.config.layer_norm_eps)?,
        bias: store.get("mlm.bias", &[start.config.vocab_size], Init::Zeros)?,
    };
    let encodings: Vec<Encoding> = corpus.iter().map(|i| start.tokenizer.encode(i)).collect();

    let schedule = LinearSchedule::new(cfg.peak_lr, cfg.warmup_ratio, cfg.steps);
    let mut opt = Optimizers::new(
        &store,
        &[ENCODER_PREFIX, "mlm."],
        ParamsAdamW {
            lr: 0.0,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.epsilon,
            weight_decay: cfg.weight_decay,
        },
    )?;
    let mut order_rng = stream(cfg.seed, 11);
    let mut mask_rng = stream(cfg.seed, 12);
    let mut dropout_rng = stream(cfg.seed, 13);
    let device = store.device().clone();

    let mut order: Vec<usize> = (0..encodings.len()).collect();
    let mut cursor = order.len();
    let mut losses = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        if cursor + cfg.batch_size > order.len() {
            order.shuffle(&mut order_rng);
            cursor = 0;
        }
        let mut batch: Vec<Encoding> = order[cursor..cursor + cfg.batch_size]
            .iter()
            .map(|&i| encodings[i].clone())
            .collect();
        cursor += cfg.batch_size;
        let (positions, targets) = mask_tokens(&mut batch, cfg.mask_prob, start.config.vocab_size, &mut mask_rng);
        if positions.is_empty() {
            return Err(Error::InsufficientData("batch has no maskable tokens".into()));
        }
        let refs: Vec<&Encoding> = batch.iter().collect();
        let hidden = encoder.forward(&Batch::new(&refs, &device)?, Some(&mut dropout_rng))?;
        let n = positions.len();
        let picked = hidden
            .flatten_to(1)?
            .index_select(&Tensor::from_vec(positions, n, &device)?, 0)?;
        let x = mlm.norm.forward(&gelu(&mlm.transform.forward(&picked)?)?)?;
        let logits = x.matmul(&encoder.word_embeddings().t()?)?.broadcast_add(&mlm.bias)?;
        let loss = candle_nn::loss::cross_entropy(&logits, &Tensor::from_vec(targets, n, &device)?)?;
        let value = f32_scalar(&loss)?;
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss { step, value });
        }
        opt.step(&loss, schedule.lr(step))?;
        losses.push(value);
        if step % 50 == 0 {
            log::info!("adapt step {step}: masked-token loss {value:.4}");
        }
    }

    let weights = store
        .snapshot()?
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENCODER_PREFIX))
        .collect();
    let adapted = EncoderCheckpoint {
        config: start.config.clone(),
        tokenizer: start.tokenizer.clone(),
        mode: start.mode,
        weights,
    };
    Ok((adapted, AdaptOutcome { losses }))
}
