//! Dense tensors, a differentiation tape and the Adam optimizer.

mod adam;
mod tape;
#[allow(clippy::module_inception)]
mod tensor;

pub use adam::{adam_step, Adam, AdamConfig, AdamState};
pub use tape::{Gradients, ScatterEntry, Tape, Var};
pub use tensor::Tensor;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Variance guard for layer normalization.
pub const LAYERNORM_EPS: f64 = 1e-5;
/// Norm guard for L2 row normalization.
pub const L2_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: shape mismatch ({detail})")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("target class {target} out of range for {classes} classes")]
    TargetOutOfRange { target: usize, classes: usize },
    #[error("backward needs a scalar loss, got shape {shape:?}")]
    NotScalar { shape: Vec<usize> },
    #[error("{0}")]
    InvalidArgument(String),
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Returns `(-log softmax(logits)[target], softmax(logits))`, with the loss
/// taken from the log-sum-exp form so it never evaluates `log(0)`.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>), TensorError> {
    let classes = logits.len();
    if classes < 2 {
        return Err(TensorError::InvalidArgument("softmax needs at least 2 classes".into()));
    }
    if target >= classes {
        return Err(TensorError::TargetOutOfRange { target, classes });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    let loss = lse - logits[target];
    Ok((loss.max(0.0), softmax(logits)))
}
