//! The DoubleH message-passing model.
//!
//! Each layer treats a node's one-hop neighbors (the other node kind) and
//! its two-hop neighbors (the same kind) as separate channels: each channel
//! is normalized, dropped out, passed through its own typed linear map and
//! rectified, then the channels are summed into one neighborhood vector that
//! is combined with the node's previous representation.

mod forward;
mod params;

pub use forward::{
    aggregate_neighborhood, batch_loss, classify, layer_forward, loss_from_probs, model_forward,
    transform_neighbor_set, ForwardOutput, NeighborSet, NodeFeatures,
};
pub use params::{LayerParams, ModelParams, ParamVars};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, NodeRef};
use crate::tensor::TensorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hop {
    One,
    Two,
}

impl Hop {
    pub fn slot(self) -> usize {
        match self {
            Hop::One => 0,
            Hop::Two => 1,
        }
    }
}

/// Which neighbor channels feed the aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    #[default]
    Full,
    /// One-hop (heterogeneous) channel only.
    HeteroOnly,
    /// Two-hop (homogeneous) channel only.
    HomoOnly,
}

impl Ablation {
    pub fn uses(self, hop: Hop) -> bool {
        matches!(
            (self, hop),
            (Ablation::Full, _) | (Ablation::HeteroOnly, Hop::One) | (Ablation::HomoOnly, Hop::Two)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Sum,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LossReduction {
    #[default]
    Mean,
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleHConfig {
    pub layers: usize,
    pub hidden: usize,
    pub feature_dim: usize,
    pub dropout: f64,
    pub one_hop_size: usize,
    pub two_hop_size: usize,
    pub aggregation: Aggregation,
    pub ablation: Ablation,
    pub classes: usize,
}

impl Default for DoubleHConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            hidden: 32,
            feature_dim: 32,
            dropout: 0.1,
            one_hop_size: 10,
            two_hop_size: 10,
            aggregation: Aggregation::Sum,
            ablation: Ablation::Full,
            classes: 2,
        }
    }
}

impl DoubleHConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |m: &str| Err(ModelError::Config(m.to_string()));
        if !(1..=3).contains(&self.layers) {
            return fail("layers must be between 1 and 3");
        }
        if self.hidden == 0 || self.feature_dim == 0 {
            return fail("dimensions must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail("dropout must lie in [0, 1)");
        }
        if self.one_hop_size == 0 || self.two_hop_size == 0 {
            return fail("sampler sizes must be at least 1");
        }
        if self.classes != 2 {
            return fail("only binary stance classification is supported");
        }
        Ok(())
    }

    /// Input width of layer `k` (1-based).
    pub fn layer_input_dim(&self, k: usize) -> usize {
        if k == 1 {
            self.feature_dim
        } else {
            self.hidden
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("no embedding for {node} at depth {depth}")]
    MissingEmbedding { node: NodeRef, depth: usize },
    #[error("frontier does not match config: {0}")]
    FrontierMismatch(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("loss over an empty batch")]
    EmptyBatch,
}

#[cfg(test)]
mod tests;
