use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate_metrics, split_dataset, Metrics, Split, TrainError};
use crate::data::text::fnv1a64;
use crate::graph::{build_frontier, BipartiteGraph, NodeRef, SampleMode};
use crate::labeling::StanceLabel;
use crate::model::{batch_loss, model_forward, DoubleHConfig, LossReduction, ModelParams, NodeFeatures};
use crate::tensor::{softmax, Adam, AdamConfig, Mode, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub split: u64,
    pub init: u64,
    /// Drives batch order, neighbor sampling and dropout.
    pub sampler: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            split: 1,
            init: 2,
            sampler: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: DoubleHConfig,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs without a validation-F1 gain before stopping; 0 never stops early.
    pub patience: usize,
    pub reduction: LossReduction,
    pub sample_mode: SampleMode,
    pub split_ratio: f64,
    pub seeds: Seeds,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: DoubleHConfig::default(),
            lr: 0.001,
            batch_size: 64,
            epochs: 100,
            patience: 10,
            reduction: LossReduction::Mean,
            sample_mode: SampleMode::Replacement,
            split_ratio: 0.9,
            seeds: Seeds::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        self.model.validate()?;
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(TrainError::Config(format!(
                "learning rate {} must be finite and non-negative",
                self.lr
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(TrainError::Config("batch size and epochs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-user training loss over the epoch.
    pub train_loss: f64,
    pub validation: Metrics,
}

/// Everything about a run except wall-clock time, so equal seeds give equal reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub train_users: usize,
    pub validation_users: usize,
    pub parameter_count: usize,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_validation: Metrics,
    pub stopped_early: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub training_seconds: f64,
    pub epoch_seconds: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch.
    pub params: ModelParams,
    pub report: TrainReport,
    pub timing: Timing,
}

/// Positive-class probability for each node, in input order. Eval mode.
#[allow(clippy::too_many_arguments)]
pub fn predict<R: Rng + ?Sized>(
    params: &ModelParams,
    config: &DoubleHConfig,
    graph: &BipartiteGraph,
    features: &NodeFeatures,
    nodes: &[NodeRef],
    batch_size: usize,
    sample_mode: SampleMode,
    rng: &mut R,
) -> Result<Vec<f64>, TrainError> {
    let mut scores = Vec::with_capacity(nodes.len());
    for chunk in nodes.chunks(batch_size.max(1)) {
        let frontier = build_frontier(
            graph,
            chunk,
            config.layers,
            config.one_hop_size,
            config.two_hop_size,
            sample_mode,
            rng,
        )?;
        let mut tape = Tape::new();
        let vars = params.register(&mut tape);
        let out = model_forward(&mut tape, graph, &frontier, features, &vars, config, Mode::Eval, rng)?;
        let logits = tape.affine(out.embeddings(), vars.classifier_weight, Some(vars.classifier_bias))?;
        let values = tape.value(logits);
        let row_of: HashMap<NodeRef, usize> = out.nodes().iter().enumerate().map(|(i, v)| (*v, i)).collect();
        for v in chunk {
            let p = softmax(values.row(row_of[v]));
            scores.push(p[StanceLabel::Positive.as_index()]);
        }
    }
    Ok(scores)
}

/// Mini-batch training with Adam, per-epoch validation and best-F1 checkpointing.
pub fn train_model(
    graph: &BipartiteGraph,
    features: &NodeFeatures,
    labeled: &[(NodeRef, StanceLabel)],
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let model = &config.model;
    let mask = split_dataset(labeled.len(), config.split_ratio, config.seeds.split)?;
    let train: Vec<(NodeRef, StanceLabel)> = mask.indices(Split::Train).into_iter().map(|i| labeled[i]).collect();
    let val_nodes: Vec<NodeRef> = mask
        .indices(Split::Validation)
        .into_iter()
        .map(|i| labeled[i].0)
        .collect();
    let val_gold: Vec<StanceLabel> = mask
        .indices(Split::Validation)
        .into_iter()
        .map(|i| labeled[i].1)
        .collect();

    let mut params = ModelParams::init(model, &mut ChaCha8Rng::seed_from_u64(config.seeds.init))?;
    let mut adam = Adam::new(AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(config.seeds.sampler);
    let mut eval_rng = ChaCha8Rng::seed_from_u64(config.seeds.sampler);
    eval_rng.set_stream(1);

    let started = Instant::now();
    let mut epochs = Vec::new();
    let mut epoch_seconds = Vec::new();
    let mut best: Option<(usize, Metrics, ModelParams)> = None;
    let mut stale = 0;
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=config.epochs {
        let epoch_start = Instant::now();
        order.shuffle(&mut rng);
        let mut total_loss = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<NodeRef> = chunk.iter().map(|&i| train[i].0).collect();
            let gold: Vec<StanceLabel> = chunk.iter().map(|&i| train[i].1).collect();
            let frontier = build_frontier(
                graph,
                &batch,
                model.layers,
                model.one_hop_size,
                model.two_hop_size,
                config.sample_mode,
                &mut rng,
            )?;
            let mut tape = Tape::new();
            let vars = params.register(&mut tape);
            let out = model_forward(
                &mut tape,
                graph,
                &frontier,
                features,
                &vars,
                model,
                Mode::Train,
                &mut rng,
            )?;
            if out.nodes() != batch.as_slice() {
                return Err(TrainError::Config("training batch must not repeat users".into()));
            }
            let logits = tape.affine(out.embeddings(), vars.classifier_weight, Some(vars.classifier_bias))?;
            let loss = batch_loss(&mut tape, logits, &gold, config.reduction)?;
            let value = tape.value(loss).item().unwrap_or(f64::NAN);
            if !value.is_finite() {
                return Err(TrainError::NonFinite(format!(
                    "training loss at epoch {epoch}, batch {}",
                    b + 1
                )));
            }
            total_loss += match config.reduction {
                LossReduction::Mean => value * batch.len() as f64,
                LossReduction::Sum => value,
            };
            let grads = tape.backward(loss)?;
            let grads: Vec<_> = vars.all().into_iter().map(|v| grads.wrt(v)).collect();
            adam.step(&mut params.tensors_mut(), &grads)?;
        }

        let scores = predict(
            &params,
            model,
            graph,
            features,
            &val_nodes,
            config.batch_size,
            config.sample_mode,
            &mut eval_rng,
        )?;
        let validation = evaluate_metrics(&scores, &val_gold)?;
        epochs.push(EpochRecord {
            epoch,
            train_loss: total_loss / train.len() as f64,
            validation,
        });
        epoch_seconds.push(epoch_start.elapsed().as_secs_f64());

        let improved = best
            .as_ref()
            .is_none_or(|(_, m, _)| validation.f1_positive > m.f1_positive);
        if improved {
            best = Some((epoch, validation, params.clone()));
            stale = 0;
        } else {
            stale += 1;
            if config.patience > 0 && stale >= config.patience {
                stopped_early = epoch < config.epochs;
                break;
            }
        }
    }

    let (best_epoch, best_validation, best_params) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        report: TrainReport {
            config: config.clone(),
            train_users: train.len(),
            validation_users: val_nodes.len(),
            parameter_count: best_params.parameter_count(),
            epochs,
            best_epoch,
            best_validation,
            stopped_early,
        },
        params: best_params,
        timing: Timing {
            training_seconds: started.elapsed().as_secs_f64(),
            epoch_seconds,
        },
    })
}

/// Stable 64-bit hash of the serialized config, hex encoded.
pub fn config_hash(config: &TrainConfig) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    format!("{:016x}", fnv1a64(json.as_bytes()))
}

/// One CSV row per epoch: config hash, epoch, loss, acc, auc, f1_pos, f1_macro, seconds.
pub fn metrics_csv(report: &TrainReport, timing: &Timing) -> String {
    let hash = config_hash(&report.config);
    let mut out = String::from("config_hash,epoch,loss,acc,auc,f1_pos,f1_macro,seconds\n");
    for (i, e) in report.epochs.iter().enumerate() {
        let v = &e.validation;
        let auc = v.auc.map(|a| a.to_string()).unwrap_or_default();
        let secs = timing.epoch_seconds.get(i).copied().unwrap_or(0.0);
        let _ = writeln!(
            out,
            "{hash},{},{},{},{auc},{},{},{secs}",
            e.epoch, e.train_loss, v.accuracy, v.f1_positive, v.f1_macro
        );
    }
    out
}
