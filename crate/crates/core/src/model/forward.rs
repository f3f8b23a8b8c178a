use std::collections::HashMap;

use indexmap::IndexSet;
use rand::Rng;

use super::{Ablation, Aggregation, DoubleHConfig, Hop, LossReduction, ModelError, ParamVars};
use crate::graph::{BipartiteGraph, Frontier, NodeKind, NodeRef, SampleMode};
use crate::labeling::StanceLabel;
use crate::tensor::{softmax, Mode, ScatterEntry, Tape, Tensor, Var, L2_EPS, LAYERNORM_EPS};

/// Input features for every node, one row per node index.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures {
    pub users: Tensor,
    pub tweets: Tensor,
}

impl NodeFeatures {
    pub fn new(users: Tensor, tweets: Tensor) -> Result<Self, ModelError> {
        if users.rank() != 2 || tweets.rank() != 2 || users.cols() != tweets.cols() {
            return Err(ModelError::Dimension(format!(
                "user features {:?} vs tweet features {:?}",
                users.shape(),
                tweets.shape()
            )));
        }
        Ok(Self { users, tweets })
    }

    pub fn dim(&self) -> usize {
        self.users.cols()
    }

    pub fn row(&self, v: NodeRef) -> &[f64] {
        match v.kind {
            NodeKind::User => self.users.row(v.index),
            NodeKind::Tweet => self.tweets.row(v.index),
        }
    }

    fn covers(&self, graph: &BipartiteGraph) -> bool {
        self.users.rows() == graph.user_count() && self.tweets.rows() == graph.tweet_count()
    }
}

/// One channel's transformed neighbors and how they scatter onto centers.
/// Each part pairs a `[sources, hidden]` matrix with `(center, source)` entries.
#[derive(Debug, Clone, Default)]
pub struct NeighborSet {
    pub parts: Vec<(Var, Vec<ScatterEntry>)>,
}

impl NeighborSet {
    pub fn is_empty(&self) -> bool {
        self.parts.iter().all(|(_, e)| e.is_empty())
    }
}

/// Layernorm, dropout, the typed linear map and the rectifier, applied to each
/// row of a stacked neighbor multiset. Zero rows in, zero rows out.
pub fn transform_neighbor_set<R: Rng + ?Sized>(
    tape: &mut Tape,
    neighbors: Var,
    weight: Var,
    dropout: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<Var, ModelError> {
    let normed = tape.layernorm(neighbors, LAYERNORM_EPS)?;
    let dropped = tape.dropout(normed, dropout, mode, rng)?;
    let mapped = tape.affine(dropped, weight, None)?;
    Ok(tape.relu(mapped)?)
}

/// Per-center reduction over the channels the ablation keeps. Centers with
/// nothing selected get the zero vector.
pub fn aggregate_neighborhood(
    tape: &mut Tape,
    hetero: &NeighborSet,
    homo: &NeighborSet,
    ablation: Ablation,
    aggregation: Aggregation,
    centers: usize,
    dim: usize,
) -> Result<Var, ModelError> {
    let mut selected: Vec<&(Var, Vec<ScatterEntry>)> = Vec::new();
    if ablation.uses(Hop::One) {
        selected.extend(&hetero.parts);
    }
    if ablation.uses(Hop::Two) {
        selected.extend(&homo.parts);
    }
    for (v, _) in &selected {
        if tape.value(*v).cols() != dim {
            return Err(ModelError::Dimension(format!(
                "neighbor width {} vs {dim}",
                tape.value(*v).cols()
            )));
        }
    }

    let scale: Vec<f64> = match aggregation {
        Aggregation::Sum => vec![1.0; centers],
        Aggregation::Mean => {
            let mut totals = vec![0.0; centers];
            for (_, entries) in &selected {
                for e in entries {
                    totals[e.dst] += e.weight;
                }
            }
            totals.iter().map(|t| if *t > 0.0 { 1.0 / t } else { 0.0 }).collect()
        }
    };

    let mut acc: Option<Var> = None;
    for (src, entries) in selected {
        if entries.is_empty() {
            continue;
        }
        let weighted = entries
            .iter()
            .map(|e| ScatterEntry {
                weight: e.weight * scale[e.dst],
                ..*e
            })
            .collect();
        let part = tape.scatter(*src, weighted, centers)?;
        acc = Some(match acc {
            None => part,
            Some(prev) => tape.add(prev, part)?,
        });
    }
    Ok(match acc {
        Some(v) => v,
        None => tape.constant(Tensor::zeros(&[centers, dim])),
    })
}

/// `l2_normalize(relu(W · [h_prev ; aggregated]))`, row-wise.
pub fn layer_forward(tape: &mut Tape, h_prev: Var, aggregated: Var, combine: Var) -> Result<Var, ModelError> {
    let joined = tape.concat(h_prev, aggregated)?;
    let mixed = tape.affine(joined, combine, None)?;
    let active = tape.relu(mixed)?;
    Ok(tape.l2_normalize(active, L2_EPS)?)
}

/// Row-wise class probabilities `softmax(W h + b)`.
pub fn classify(h: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor, ModelError> {
    let mut tape = Tape::new();
    let (h, w, b) = (
        tape.constant(h.clone()),
        tape.constant(weight.clone()),
        tape.constant(bias.clone()),
    );
    let logits = tape.affine(h, w, Some(b))?;
    let lv = tape.value(logits);
    let mut probs = Vec::with_capacity(lv.numel());
    for r in 0..lv.rows() {
        probs.extend(softmax(lv.row(r)));
    }
    Ok(Tensor::new(lv.shape().to_vec(), probs)?)
}

/// Cross-entropy of classifier logits against gold labels.
pub fn batch_loss(
    tape: &mut Tape,
    logits: Var,
    gold: &[StanceLabel],
    reduction: LossReduction,
) -> Result<Var, ModelError> {
    if gold.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let targets: Vec<usize> = gold.iter().map(|g| g.as_index()).collect();
    let per_user = tape.cross_entropy(logits, &targets)?;
    Ok(match reduction {
        LossReduction::Sum => tape.sum(per_user)?,
        LossReduction::Mean => tape.mean(per_user)?,
    })
}

/// `Σ −log p[gold]` (or its mean) over already-normalized probabilities.
pub fn loss_from_probs(probs: &[Vec<f64>], gold: &[StanceLabel], reduction: LossReduction) -> Result<f64, ModelError> {
    if gold.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    if probs.len() != gold.len() {
        return Err(ModelError::Dimension(format!(
            "{} predictions vs {} labels",
            probs.len(),
            gold.len()
        )));
    }
    let total: f64 = probs.iter().zip(gold).map(|(p, g)| -p[g.as_index()].ln()).sum();
    Ok(match reduction {
        LossReduction::Sum => total,
        LossReduction::Mean => total / gold.len() as f64,
    })
}

/// Output of a forward pass: one level per depth, `levels[k]` holding the
/// nodes of `B^k` and their stacked representations.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub levels: Vec<(Vec<NodeRef>, Var)>,
}

impl ForwardOutput {
    /// Nodes of the batch in frontier order.
    pub fn nodes(&self) -> &[NodeRef] {
        &self.levels.last().expect("at least one level").0
    }

    /// Final-layer representations, one row per batch node.
    pub fn embeddings(&self) -> Var {
        self.levels.last().expect("at least one level").1
    }
}

fn check_frontier(frontier: &Frontier, config: &DoubleHConfig) -> Result<(), ModelError> {
    if frontier.depth != config.layers {
        return Err(ModelError::FrontierMismatch(format!(
            "depth {} vs {} layers",
            frontier.depth, config.layers
        )));
    }
    if frontier.mode == SampleMode::Replacement
        && (frontier.one_hop_size != config.one_hop_size || frontier.two_hop_size != config.two_hop_size)
    {
        return Err(ModelError::FrontierMismatch(format!(
            "sampler sizes {}/{} vs {}/{}",
            frontier.one_hop_size, frontier.two_hop_size, config.one_hop_size, config.two_hop_size
        )));
    }
    Ok(())
}

/// Runs every layer over the frontier's nested node sets, reusing its
/// stored samples. Each distinct neighbor is transformed once per channel
/// and center kind, so its dropout mask is shared by every center that
/// sampled it.
#[allow(clippy::too_many_arguments)]
pub fn model_forward<R: Rng + ?Sized>(
    tape: &mut Tape,
    graph: &BipartiteGraph,
    frontier: &Frontier,
    features: &NodeFeatures,
    params: &ParamVars,
    config: &DoubleHConfig,
    mode: Mode,
    rng: &mut R,
) -> Result<ForwardOutput, ModelError> {
    config.validate()?;
    check_frontier(frontier, config)?;
    if features.dim() != config.feature_dim || !features.covers(graph) {
        return Err(ModelError::Dimension(format!(
            "features are {}x{} / {}x{} for a {}-user {}-tweet graph with feature_dim {}",
            features.users.rows(),
            features.users.cols(),
            features.tweets.rows(),
            features.tweets.cols(),
            graph.user_count(),
            graph.tweet_count(),
            config.feature_dim
        )));
    }

    let base = frontier.layer(0);
    let mut input = Vec::with_capacity(base.len() * config.feature_dim);
    for &v in base {
        if !graph.contains(v) {
            return Err(crate::graph::GraphError::UnknownNode(v).into());
        }
        input.extend_from_slice(features.row(v));
    }
    let h0 = tape.constant(Tensor::matrix(base.len(), config.feature_dim, input)?);
    let mut levels = vec![(base.to_vec(), h0)];

    for k in 1..=config.layers {
        let (prev_nodes, prev_h) = &levels[k - 1];
        let prev_h = *prev_h;
        let position: HashMap<NodeRef, usize> = prev_nodes.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let locate = |v: NodeRef| {
            position
                .get(&v)
                .copied()
                .ok_or(ModelError::MissingEmbedding { node: v, depth: k - 1 })
        };
        let centers = frontier.layer(k).to_vec();

        let mut channels = [NeighborSet::default(), NeighborSet::default()];
        for hop in [Hop::One, Hop::Two] {
            if !config.ablation.uses(hop) {
                continue;
            }
            for center_kind in [NodeKind::User, NodeKind::Tweet] {
                let mut sources: IndexSet<NodeRef> = IndexSet::new();
                let mut entries = Vec::new();
                for (ci, &u) in centers.iter().enumerate() {
                    if u.kind != center_kind {
                        continue;
                    }
                    let s = frontier
                        .samples(k, u)
                        .ok_or_else(|| ModelError::FrontierMismatch(format!("no samples for {u} at depth {k}")))?;
                    let drawn: Box<dyn Iterator<Item = &NodeRef>> = match hop {
                        Hop::One => Box::new(s.one_hop.iter()),
                        Hop::Two => Box::new(s.two_hop.iter().flatten()),
                    };
                    for &w in drawn {
                        let (si, _) = sources.insert_full(w);
                        entries.push(ScatterEntry {
                            dst: ci,
                            src: si,
                            weight: 1.0,
                        });
                    }
                }
                if entries.is_empty() {
                    continue;
                }
                let rows = sources.iter().map(|&w| locate(w)).collect::<Result<Vec<_>, _>>()?;
                let stacked = tape.gather_rows(prev_h, &rows)?;
                let weight = params.transform(k, hop, center_kind);
                let transformed = transform_neighbor_set(tape, stacked, weight, config.dropout, mode, rng)?;
                channels[hop.slot()].parts.push((transformed, entries));
            }
        }

        let [hetero, homo] = &channels;
        let aggregated = aggregate_neighborhood(
            tape,
            hetero,
            homo,
            config.ablation,
            config.aggregation,
            centers.len(),
            config.hidden,
        )?;
        let own_rows = centers.iter().map(|&u| locate(u)).collect::<Result<Vec<_>, _>>()?;
        let own = tape.gather_rows(prev_h, &own_rows)?;
        let h = layer_forward(tape, own, aggregated, params.combine(k))?;
        levels.push((centers, h));
    }
    Ok(ForwardOutput { levels })
}
