//! Post-norm transformer encoder in the BERT layout.

use candle_core::{DType, Device, Tensor, D};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{Init, ParamStore};
use super::tokenizer::{Encoding, PAD};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub hidden_size: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub intermediate_size: usize,
    pub max_positions: usize,
    pub type_vocab_size: usize,
    pub dropout: f64,
    pub layer_norm_eps: f64,
    pub init_std: f64,
}

impl EncoderConfig {
    /// BERT-base geometry.
    pub fn base(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            hidden_size: 768,
            num_layers: 12,
            num_heads: 12,
            intermediate_size: 3072,
            max_positions: 512,
            type_vocab_size: 2,
            dropout: 0.1,
            layer_norm_eps: 1e-12,
            init_std: 0.02,
        }
    }

    /// Two-layer encoder small enough to train on a CPU in seconds.
    pub fn tiny(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            hidden_size: 64,
            num_layers: 2,
            num_heads: 4,
            intermediate_size: 128,
            max_positions: 512,
            type_vocab_size: 2,
            dropout: 0.1,
            layer_norm_eps: 1e-12,
            init_std: 0.02,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 || self.num_heads == 0 || !self.hidden_size.is_multiple_of(self.num_heads) {
            return Err(Error::Config(format!(
                "hidden_size {} must be a positive multiple of num_heads {}",
                self.hidden_size, self.num_heads
            )));
        }
        if self.num_layers == 0 || self.vocab_size == 0 || self.max_positions == 0 {
            return Err(Error::Config("encoder dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Padded token batch.
#[derive(Debug)]
pub struct Batch {
    pub ids: Tensor,
    pub type_ids: Tensor,
    /// 1.0 on real tokens, 0.0 on padding; `[batch, seq]`.
    pub mask: Tensor,
}

impl Batch {
    pub fn new(encodings: &[&Encoding], device: &Device) -> Result<Self> {
        let b = encodings.len();
        let t = encodings.iter().map(|e| e.len()).max().unwrap_or(0).max(1);
        let mut ids = vec![PAD; b * t];
        let mut types = vec![0u32; b * t];
        let mut mask = vec![0f32; b * t];
        for (row, e) in encodings.iter().enumerate() {
            let off = row * t;
            ids[off..off + e.len()].copy_from_slice(&e.ids);
            types[off..off + e.len()].copy_from_slice(&e.type_ids);
            mask[off..off + e.len()].fill(1.0);
        }
        Ok(Self {
            ids: Tensor::from_vec(ids, (b, t), device)?,
            type_ids: Tensor::from_vec(types, (b, t), device)?,
            mask: Tensor::from_vec(mask, (b, t), device)?,
        })
    }
}

#[derive(Debug, Clone)]
struct Linear {
    w: Tensor,
    b: Tensor,
}

impl Linear {
    fn new(store: &mut ParamStore, name: &str, d_in: usize, d_out: usize, std: f64) -> Result<Self> {
        Ok(Self {
            w: store.get(&format!("{name}.weight"), &[d_out, d_in], Init::Normal(std))?,
            b: store.get(&format!("{name}.bias"), &[d_out], Init::Zeros)?,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let dims = x.dims().to_vec();
        let d_in = *dims.last().expect("non-scalar input");
        let rows: usize = dims[..dims.len() - 1].iter().product();
        let y = x.reshape((rows, d_in))?.matmul(&self.w.t()?)?.broadcast_add(&self.b)?;
        let mut out = dims;
        *out.last_mut().unwrap() = self.w.dim(0)?;
        Ok(y.reshape(out)?)
    }
}

#[derive(Debug, Clone)]
struct LayerNorm {
    w: Tensor,
    b: Tensor,
    eps: f64,
}

impl LayerNorm {
    fn new(store: &mut ParamStore, name: &str, dim: usize, eps: f64) -> Result<Self> {
        Ok(Self {
            w: store.get(&format!("{name}.weight"), &[dim], Init::Ones)?,
            b: store.get(&format!("{name}.bias"), &[dim], Init::Zeros)?,
            eps,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mean = x.mean_keepdim(D::Minus1)?;
        let centered = x.broadcast_sub(&mean)?;
        let var = centered.sqr()?.mean_keepdim(D::Minus1)?;
        let normed = centered.broadcast_div(&(var + self.eps)?.sqrt()?)?;
        Ok(normed.broadcast_mul(&self.w)?.broadcast_add(&self.b)?)
    }
}

/// Inverted dropout with masks drawn from `rng`; identity when `rng` is None.
pub(crate) fn dropout(x: &Tensor, p: f64, rng: &mut Option<&mut ChaCha8Rng>) -> Result<Tensor> {
    let Some(rng) = rng.as_deref_mut() else {
        return Ok(x.clone());
    };
    if p <= 0.0 {
        return Ok(x.clone());
    }
    let scale = (1.0 / (1.0 - p)) as f32;
    let keep: Vec<f32> = (0..x.elem_count())
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { scale })
        .collect();
    let mask = Tensor::from_vec(keep, x.shape(), x.device())?;
    Ok(x.mul(&mask)?)
}

pub(crate) fn gelu(x: &Tensor) -> Result<Tensor> {
    Ok(x.gelu_erf()?)
}

#[derive(Debug, Clone)]
struct Layer {
    q: Linear,
    k: Linear,
    v: Linear,
    out: Linear,
    ln_attn: LayerNorm,
    ff_in: Linear,
    ff_out: Linear,
    ln_ff: LayerNorm,
}

#[derive(Debug, Clone)]
pub struct Encoder {
    cfg: EncoderConfig,
    word: Tensor,
    position: Tensor,
    token_type: Tensor,
    ln_emb: LayerNorm,
    layers: Vec<Layer>,
}

impl Encoder {
    /// Registers (or picks up preloaded) parameters under `prefix`.
    pub fn new(store: &mut ParamStore, prefix: &str, cfg: &EncoderConfig) -> Result<Self> {
        cfg.validate()?;
        let h = cfg.hidden_size;
        let std = cfg.init_std;
        let p = |s: &str| format!("{prefix}{s}");
        let word = store.get(&p("embeddings.word"), &[cfg.vocab_size, h], Init::Normal(std))?;
        let position = store.get(&p("embeddings.position"), &[cfg.max_positions, h], Init::Normal(std))?;
        let token_type = store.get(
            &p("embeddings.token_type"),
            &[cfg.type_vocab_size, h],
            Init::Normal(std),
        )?;
        let ln_emb = LayerNorm::new(store, &p("embeddings.ln"), h, cfg.layer_norm_eps)?;
        let mut layers = Vec::with_capacity(cfg.num_layers);
        for i in 0..cfg.num_layers {
            let l = |s: &str| p(&format!("layer{i}.{s}"));
            layers.push(Layer {
                q: Linear::new(store, &l("attn.q"), h, h, std)?,
                k: Linear::new(store, &l("attn.k"), h, h, std)?,
                v: Linear::new(store, &l("attn.v"), h, h, std)?,
                out: Linear::new(store, &l("attn.out"), h, h, std)?,
                ln_attn: LayerNorm::new(store, &l("attn.ln"), h, cfg.layer_norm_eps)?,
                ff_in: Linear::new(store, &l("ff.in"), h, cfg.intermediate_size, std)?,
                ff_out: Linear::new(store, &l("ff.out"), cfg.intermediate_size, h, std)?,
                ln_ff: LayerNorm::new(store, &l("ff.ln"), h, cfg.layer_norm_eps)?,
            });
        }
        Ok(Self {
            cfg: cfg.clone(),
            word,
            position,
            token_type,
            ln_emb,
            layers,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.cfg
    }

    pub fn word_embeddings(&self) -> &Tensor {
        &self.word
    }

    /// Hidden states `[batch, seq, hidden]`. Dropout is active iff `rng` is set.
    pub fn forward(&self, batch: &Batch, mut rng: Option<&mut ChaCha8Rng>) -> Result<Tensor> {
        let (b, t) = batch.ids.dims2()?;
        if t > self.cfg.max_positions {
            return Err(Error::Validation(format!(
                "sequence length {t} exceeds {} positions",
                self.cfg.max_positions
            )));
        }
        let h = self.cfg.hidden_size;
        let nh = self.cfg.num_heads;
        let hd = h / nh;
        let p = self.cfg.dropout;

        let words = self
            .word
            .index_select(&batch.ids.flatten_all()?, 0)?
            .reshape((b, t, h))?;
        let types = self
            .token_type
            .index_select(&batch.type_ids.flatten_all()?, 0)?
            .reshape((b, t, h))?;
        let pos = self.position.narrow(0, 0, t)?.unsqueeze(0)?;
        let x = words.add(&types)?.broadcast_add(&pos)?;
        let mut x = dropout(&self.ln_emb.forward(&x)?, p, &mut rng)?;

        // Large negative bias on padded keys.
        let bias = ((&batch.mask - 1.0)? * 1e4)?.reshape((b, 1, 1, t))?;
        let scale = 1.0 / (hd as f64).sqrt();
        let heads = |y: Tensor| -> Result<Tensor> { Ok(y.reshape((b, t, nh, hd))?.transpose(1, 2)?.contiguous()?) };
        for layer in &self.layers {
            let q = heads(layer.q.forward(&x)?)?;
            let k = heads(layer.k.forward(&x)?)?;
            let v = heads(layer.v.forward(&x)?)?;
            let scores = (q.matmul(&k.t()?.contiguous()?)? * scale)?.broadcast_add(&bias)?;
            let probs = dropout(&candle_nn::ops::softmax(&scores, D::Minus1)?, p, &mut rng)?;
            let ctx = probs.matmul(&v)?.transpose(1, 2)?.contiguous()?.reshape((b, t, h))?;
            let attn = dropout(&layer.out.forward(&ctx)?, p, &mut rng)?;
            x = layer.ln_attn.forward(&(x + attn)?)?;
            let ff = layer.ff_out.forward(&gelu(&layer.ff_in.forward(&x)?)?)?;
            let ff = dropout(&ff, p, &mut rng)?;
            x = layer.ln_ff.forward(&(x + ff)?)?;
        }
        Ok(x)
    }

    /// Final hidden state of the leading [CLS] token, `[batch, hidden]`.
    pub fn cls(&self, batch: &Batch, rng: Option<&mut ChaCha8Rng>) -> Result<Tensor> {
        Ok(self.forward(batch, rng)?.narrow(1, 0, 1)?.squeeze(1)?)
    }
}

pub(crate) fn head(store: &mut ParamStore, name: &str, d_in: usize, d_out: usize, std: f64) -> Result<Head> {
    Ok(Head(Linear::new(store, name, d_in, d_out, std)?))
}

/// Dense projection used by the task heads.
#[derive(Debug, Clone)]
pub(crate) struct Head(Linear);

impl Head {
    pub(crate) fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.0.forward(x)
    }
}

pub(crate) fn layer_norm(store: &mut ParamStore, name: &str, dim: usize, eps: f64) -> Result<Norm> {
    Ok(Norm(LayerNorm::new(store, name, dim, eps)?))
}

#[derive(Debug, Clone)]
pub(crate) struct Norm(LayerNorm);

impl Norm {
    pub(crate) fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.0.forward(x)
    }
}

pub(crate) fn f32_scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(DType::F32)?.to_scalar::<f32>()? as f64)
}
