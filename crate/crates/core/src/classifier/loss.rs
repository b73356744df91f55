//! Binary and multi-label cross-entropy on probabilities.

use candle_core::Tensor;

use crate::error::{Error, Result};

/// Probability clamp applied before taking logarithms.
pub const EPS: f64 = 1e-7;

/// Width of the fine-grained label vector.
pub const LABEL_DIM: usize = 9;

fn clamp(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

/// Cross-entropy of a single Bernoulli prediction `p` against target `y`.
pub fn binary_loss(y: f64, p: f64) -> f64 {
    let p = clamp(p);
    -y * p.ln() - (1.0 - y) * (1.0 - p).ln()
}

/// d binary_loss / dp. Zero where the clamp is active.
pub fn binary_loss_grad(y: f64, p: f64) -> f64 {
    if !(EPS..=1.0 - EPS).contains(&p) {
        return 0.0;
    }
    -y / p + (1.0 - y) / (1.0 - p)
}

fn check_dims(y: &[f64], p: &[f64]) -> Result<()> {
    if y.len() != LABEL_DIM {
        return Err(Error::DimensionMismatch {
            expected: LABEL_DIM,
            got: y.len(),
        });
    }
    if p.len() != LABEL_DIM {
        return Err(Error::DimensionMismatch {
            expected: LABEL_DIM,
            got: p.len(),
        });
    }
    Ok(())
}

/// Sum of per-label binary losses over a 9-dimensional label vector.
pub fn multilabel_loss(y: &[f64], p: &[f64]) -> Result<f64> {
    check_dims(y, p)?;
    Ok(y.iter().zip(p).map(|(&y, &p)| binary_loss(y, p)).sum())
}

pub fn multilabel_loss_grad(y: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    check_dims(y, p)?;
    Ok(y.iter().zip(p).map(|(&y, &p)| binary_loss_grad(y, p)).collect())
}

/// Tensor form used for training: `probs` and `targets` are `[batch, d]`.
/// Sums over labels, averages over the batch.
pub fn bce_tensor(probs: &Tensor, targets: &Tensor) -> Result<Tensor> {
    let p = probs.clamp(EPS as f32, 1.0 - EPS as f32)?;
    let pos = targets.mul(&p.log()?)?;
    let neg = targets.affine(-1.0, 1.0)?.mul(&p.affine(-1.0, 1.0)?.log()?)?;
    let per_example = (pos + neg)?.neg()?.sum(1)?;
    Ok(per_example.mean(0)?)
}
