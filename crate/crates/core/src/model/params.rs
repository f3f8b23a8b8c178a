use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DoubleHConfig, Hop, ModelError};
use crate::graph::NodeKind;
use crate::tensor::{Tape, Tensor, Var};

/// Weights of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// Neighbor transforms indexed `[hop][center kind]`, each `hidden × input`.
    pub transforms: [[Tensor; 2]; 2],
    /// Combine matrix over `[h_prev ; aggregated]`, `hidden × (input + hidden)`.
    pub combine: Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub layers: Vec<LayerParams>,
    /// `classes × hidden`
    pub classifier_weight: Tensor,
    pub classifier_bias: Tensor,
}

fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect();
    Tensor::matrix(rows, cols, data).expect("finite init")
}

impl ModelParams {
    /// Glorot-uniform matrices and a zero classifier bias.
    pub fn init<R: Rng + ?Sized>(config: &DoubleHConfig, rng: &mut R) -> Result<Self, ModelError> {
        config.validate()?;
        let h = config.hidden;
        let layers = (1..=config.layers)
            .map(|k| {
                let input = config.layer_input_dim(k);
                let mut t = || glorot(h, input, rng);
                let transforms = [[t(), t()], [t(), t()]];
                LayerParams {
                    transforms,
                    combine: glorot(h, input + h, rng),
                }
            })
            .collect();
        Ok(Self {
            layers,
            classifier_weight: glorot(config.classes, h, rng),
            classifier_bias: Tensor::zeros(&[config.classes]),
        })
    }

    pub fn transform(&self, layer: usize, hop: Hop, center: NodeKind) -> &Tensor {
        &self.layers[layer - 1].transforms[hop.slot()][center.slot()]
    }

    /// All tensors in a fixed order shared with [`ParamVars::all`].
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.transforms.iter().flatten());
            out.push(&l.combine);
        }
        out.push(&self.classifier_weight);
        out.push(&self.classifier_bias);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.extend(l.transforms.iter_mut().flatten());
            out.push(&mut l.combine);
        }
        out.push(&mut self.classifier_weight);
        out.push(&mut self.classifier_bias);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.numel()).sum()
    }

    /// Checks every shape against `config`.
    pub fn check(&self, config: &DoubleHConfig) -> Result<(), ModelError> {
        let mismatch = |what: String| Err(ModelError::Dimension(what));
        if self.layers.len() != config.layers {
            return mismatch(format!("{} layers vs config {}", self.layers.len(), config.layers));
        }
        let h = config.hidden;
        for (i, l) in self.layers.iter().enumerate() {
            let input = config.layer_input_dim(i + 1);
            for t in l.transforms.iter().flatten() {
                if t.shape() != [h, input] {
                    return mismatch(format!("layer {} transform {:?}", i + 1, t.shape()));
                }
            }
            if l.combine.shape() != [h, input + h] {
                return mismatch(format!("layer {} combine {:?}", i + 1, l.combine.shape()));
            }
        }
        if self.classifier_weight.shape() != [config.classes, h] || self.classifier_bias.shape() != [config.classes] {
            return mismatch("classifier".into());
        }
        if self.tensors().iter().any(|t| !t.is_finite()) {
            return mismatch("non-finite parameter".into());
        }
        Ok(())
    }

    pub fn register(&self, tape: &mut Tape) -> ParamVars {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let [[a, b], [c, d]] = &l.transforms;
                LayerVars {
                    transforms: [
                        [tape.param(a.clone()), tape.param(b.clone())],
                        [tape.param(c.clone()), tape.param(d.clone())],
                    ],
                    combine: tape.param(l.combine.clone()),
                }
            })
            .collect();
        ParamVars {
            layers,
            classifier_weight: tape.param(self.classifier_weight.clone()),
            classifier_bias: tape.param(self.classifier_bias.clone()),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LayerVars {
    pub transforms: [[Var; 2]; 2],
    pub combine: Var,
}

/// Model parameters recorded on a tape.
#[derive(Debug, Clone)]
pub struct ParamVars {
    pub(crate) layers: Vec<LayerVars>,
    pub classifier_weight: Var,
    pub classifier_bias: Var,
}

impl ParamVars {
    pub fn transform(&self, layer: usize, hop: Hop, center: NodeKind) -> Var {
        self.layers[layer - 1].transforms[hop.slot()][center.slot()]
    }

    pub fn combine(&self, layer: usize) -> Var {
        self.layers[layer - 1].combine
    }

    pub fn all(&self) -> Vec<Var> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.transforms.iter().flatten());
            out.push(l.combine);
        }
        out.push(self.classifier_weight);
        out.push(self.classifier_bias);
        out
    }
}
