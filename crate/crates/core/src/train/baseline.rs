use serde::{Deserialize, Serialize};

use super::{evaluate_metrics, Metrics, TrainError};
use crate::graph::NodeRef;
use crate::labeling::StanceLabel;
use crate::model::NodeFeatures;
use crate::tensor::{softmax, Adam, AdamConfig, Tape, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub lr: f64,
    pub epochs: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { lr: 0.05, epochs: 300 }
    }
}

fn stack(features: &NodeFeatures, nodes: &[(NodeRef, StanceLabel)]) -> Result<Tensor, TrainError> {
    let data = nodes
        .iter()
        .flat_map(|(v, _)| features.row(*v).iter().copied())
        .collect();
    Ok(Tensor::matrix(nodes.len(), features.dim(), data)?)
}

/// Full-batch logistic regression on each node's own features, ignoring the graph.
pub fn logistic_baseline(
    features: &NodeFeatures,
    train: &[(NodeRef, StanceLabel)],
    validation: &[(NodeRef, StanceLabel)],
    config: &BaselineConfig,
) -> Result<Metrics, TrainError> {
    if train.is_empty() {
        return Err(TrainError::Config("baseline needs training users".into()));
    }
    let x_train = stack(features, train)?;
    let targets: Vec<usize> = train.iter().map(|(_, g)| g.as_index()).collect();
    let mut weight = Tensor::zeros(&[2, features.dim()]);
    let mut bias = Tensor::zeros(&[2]);
    let mut adam = Adam::new(AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    });
    for _ in 0..config.epochs {
        let mut tape = Tape::new();
        let x = tape.constant(x_train.clone());
        let w = tape.param(weight.clone());
        let b = tape.param(bias.clone());
        let logits = tape.affine(x, w, Some(b))?;
        let per_row = tape.cross_entropy(logits, &targets)?;
        let loss = tape.mean(per_row)?;
        let grads = tape.backward(loss)?;
        adam.step(&mut [&mut weight, &mut bias], &[grads.wrt(w), grads.wrt(b)])?;
    }

    let x_val = stack(features, validation)?;
    let mut tape = Tape::new();
    let (x, w, b) = (tape.constant(x_val), tape.constant(weight), tape.constant(bias));
    let logits = tape.affine(x, w, Some(b))?;
    let values = tape.value(logits);
    let scores: Vec<f64> = (0..validation.len())
        .map(|r| softmax(values.row(r))[StanceLabel::Positive.as_index()])
        .collect();
    let gold: Vec<StanceLabel> = validation.iter().map(|(_, g)| *g).collect();
    evaluate_metrics(&scores, &gold)
}
