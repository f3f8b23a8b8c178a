use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::graph::{build_frontier, BipartiteGraph, EdgeKind, Interaction, NodeKind, NodeRef, SampleMode};
use crate::labeling::StanceLabel;
use crate::tensor::{Mode, ScatterEntry, Tape, Tensor, LAYERNORM_EPS};

fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::matrix(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

/// u0 posts t0, t1; u1 retweets t0; u2 posts t2 and retweets t1; u3 isolated.
fn small_graph() -> BipartiteGraph {
    BipartiteGraph::from_interactions(
        4,
        3,
        &[
            Interaction {
                user: 0,
                tweet: 0,
                kind: EdgeKind::Post,
            },
            Interaction {
                user: 0,
                tweet: 1,
                kind: EdgeKind::Post,
            },
            Interaction {
                user: 1,
                tweet: 0,
                kind: EdgeKind::Retweet,
            },
            Interaction {
                user: 2,
                tweet: 2,
                kind: EdgeKind::Post,
            },
            Interaction {
                user: 2,
                tweet: 1,
                kind: EdgeKind::Retweet,
            },
        ],
    )
    .unwrap()
}

fn features(rng: &mut ChaCha8Rng, g: &BipartiteGraph, dim: usize) -> NodeFeatures {
    NodeFeatures::new(
        rand_matrix(rng, g.user_count(), dim),
        rand_matrix(rng, g.tweet_count(), dim),
    )
    .unwrap()
}

fn config(layers: usize, ablation: Ablation) -> DoubleHConfig {
    DoubleHConfig {
        layers,
        hidden: 4,
        feature_dim: 3,
        dropout: 0.0,
        one_hop_size: 3,
        two_hop_size: 3,
        ablation,
        ..DoubleHConfig::default()
    }
}

fn forward_rows(
    g: &BipartiteGraph,
    feats: &NodeFeatures,
    params: &ModelParams,
    cfg: &DoubleHConfig,
    batch: &[NodeRef],
    mode: SampleMode,
    seed: u64,
) -> (Vec<NodeRef>, Tensor) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frontier = build_frontier(g, batch, cfg.layers, cfg.one_hop_size, cfg.two_hop_size, mode, &mut rng).unwrap();
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let out = model_forward(&mut tape, g, &frontier, feats, &vars, cfg, Mode::Eval, &mut rng).unwrap();
    (out.nodes().to_vec(), tape.value(out.embeddings()).clone())
}

#[test]
fn transform_examples() {
    let mut tape = Tape::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let w = tape.constant(Tensor::identity(2));
    let empty = tape.constant(Tensor::zeros(&[0, 2]));
    let out = transform_neighbor_set(&mut tape, empty, w, 0.0, Mode::Eval, &mut rng).unwrap();
    assert_eq!(tape.value(out).shape(), &[0, 2]);

    let one = tape.constant(Tensor::matrix(1, 2, vec![2.0, 0.0]).unwrap());
    let out = transform_neighbor_set(&mut tape, one, w, 0.0, Mode::Eval, &mut rng).unwrap();
    let v = tape.value(out).data();
    assert!((v[0] - 1.0).abs() < 1e-5 && v[1] == 0.0, "{v:?}");
}

#[test]
fn transform_matches_hand_computation() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let x = rand_matrix(&mut rng, 2, 3);
    let w = rand_matrix(&mut rng, 4, 3);
    let mut tape = Tape::new();
    let (xv, wv) = (tape.constant(x.clone()), tape.constant(w.clone()));
    let out = transform_neighbor_set(&mut tape, xv, wv, 0.0, Mode::Eval, &mut rng).unwrap();
    for r in 0..2 {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / 3.0;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0;
        let ln: Vec<f64> = row.iter().map(|v| (v - mean) / (var + LAYERNORM_EPS).sqrt()).collect();
        for o in 0..4 {
            let pre: f64 = (0..3).map(|i| w.row(o)[i] * ln[i]).sum();
            let expected = pre.max(0.0);
            assert!((tape.value(out).row(r)[o] - expected).abs() < 1e-14);
        }
    }
}

#[test]
fn aggregate_examples() {
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::matrix(1, 2, vec![1.0, 0.0]).unwrap());
    let b = tape.constant(Tensor::matrix(1, 2, vec![0.0, 1.0]).unwrap());
    let entry = vec![ScatterEntry {
        dst: 0,
        src: 0,
        weight: 1.0,
    }];
    let hetero = NeighborSet {
        parts: vec![(a, entry.clone())],
    };
    let homo = NeighborSet {
        parts: vec![(b, entry)],
    };
    let cases = [
        (Ablation::Full, [1.0, 1.0]),
        (Ablation::HeteroOnly, [1.0, 0.0]),
        (Ablation::HomoOnly, [0.0, 1.0]),
    ];
    for (ablation, expected) in cases {
        let out = aggregate_neighborhood(&mut tape, &hetero, &homo, ablation, Aggregation::Sum, 1, 2).unwrap();
        assert_eq!(tape.value(out).data(), &expected);
    }
    let out = aggregate_neighborhood(&mut tape, &hetero, &homo, Ablation::Full, Aggregation::Mean, 1, 2).unwrap();
    assert_eq!(tape.value(out).data(), &[0.5, 0.5]);

    let empty = NeighborSet::default();
    let out = aggregate_neighborhood(&mut tape, &empty, &empty, Ablation::Full, Aggregation::Sum, 1, 2).unwrap();
    assert_eq!(tape.value(out).data(), &[0.0, 0.0]);

    assert!(matches!(
        aggregate_neighborhood(&mut tape, &hetero, &homo, Ablation::Full, Aggregation::Sum, 1, 3),
        Err(ModelError::Dimension(_))
    ));
}

#[test]
fn aggregate_ignores_sample_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut tape = Tape::new();
    let t = tape.constant(rand_matrix(&mut rng, 5, 3));
    let mut entries: Vec<ScatterEntry> = (0..12)
        .map(|i| ScatterEntry {
            dst: i % 2,
            src: (i * 7) % 5,
            weight: 1.0,
        })
        .collect();
    let set = NeighborSet {
        parts: vec![(t, entries.clone())],
    };
    let a = aggregate_neighborhood(
        &mut tape,
        &set,
        &NeighborSet::default(),
        Ablation::Full,
        Aggregation::Sum,
        2,
        3,
    )
    .unwrap();
    entries.reverse();
    entries.swap(0, 5);
    let set = NeighborSet {
        parts: vec![(t, entries)],
    };
    let b = aggregate_neighborhood(
        &mut tape,
        &set,
        &NeighborSet::default(),
        Ablation::Full,
        Aggregation::Sum,
        2,
        3,
    )
    .unwrap();
    for (x, y) in tape.value(a).data().iter().zip(tape.value(b).data()) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn layer_forward_examples() {
    let mut tape = Tape::new();
    let h = tape.constant(Tensor::matrix(1, 2, vec![1.0, 0.0]).unwrap());
    let agg = tape.constant(Tensor::matrix(1, 2, vec![0.0, 1.0]).unwrap());
    let w = tape.constant(Tensor::matrix(2, 4, vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]).unwrap());
    let out = layer_forward(&mut tape, h, agg, w).unwrap();
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let v = tape.value(out).data();
    assert!((v[0] - half).abs() < 1e-15 && (v[1] - half).abs() < 1e-15);

    let zero_agg = tape.constant(Tensor::zeros(&[1, 2]));
    let zero_w = tape.constant(Tensor::zeros(&[2, 4]));
    let out = layer_forward(&mut tape, h, zero_agg, zero_w).unwrap();
    assert_eq!(tape.value(out).data(), &[0.0, 0.0]);

    let bad = tape.constant(Tensor::zeros(&[2, 5]));
    assert!(layer_forward(&mut tape, h, agg, bad).is_err());
}

#[test]
fn classify_examples() {
    let h = Tensor::matrix(1, 3, vec![0.3, -0.1, 0.9]).unwrap();
    let p = classify(&h, &Tensor::zeros(&[2, 3]), &Tensor::zeros(&[2])).unwrap();
    assert_eq!(p.data(), &[0.5, 0.5]);
    let p = classify(&h, &Tensor::zeros(&[2, 3]), &Tensor::vector(vec![10.0, -10.0]).unwrap()).unwrap();
    assert!(p.data()[0] > 1.0 - 1e-8 && p.data()[1] < 1e-8);
    assert!(classify(&h, &Tensor::zeros(&[2, 4]), &Tensor::zeros(&[2])).is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let h = rand_matrix(&mut rng, 4, 5);
        let w = rand_matrix(&mut rng, 2, 5);
        let b = Tensor::vector(vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).unwrap();
        let p = classify(&h, &w, &b).unwrap();
        for r in 0..4 {
            assert!((p.row(r).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn loss_examples() {
    use StanceLabel::*;
    let perfect = loss_from_probs(
        &[vec![1.0, 0.0], vec![0.0, 1.0]],
        &[Negative, Positive],
        LossReduction::Sum,
    )
    .unwrap();
    assert_eq!(perfect, 0.0);
    let n = 5;
    let uniform = loss_from_probs(&vec![vec![0.5, 0.5]; n], &vec![Positive; n], LossReduction::Sum).unwrap();
    assert!((uniform - n as f64 * std::f64::consts::LN_2).abs() < 1e-12);
    let single = loss_from_probs(&[vec![0.25, 0.75]], &[Positive], LossReduction::Sum).unwrap();
    assert!((single - (4.0f64 / 3.0).ln()).abs() < 1e-12);
    assert!((single - 0.287682).abs() < 1e-6);
    assert_eq!(
        loss_from_probs(&[], &[], LossReduction::Sum),
        Err(ModelError::EmptyBatch)
    );

    // logits path agrees with the probability path
    let mut tape = Tape::new();
    let logits = tape.constant(Tensor::matrix(2, 2, vec![0.0, 0.0, 1.0, 2.0]).unwrap());
    let loss = batch_loss(&mut tape, logits, &[Negative, Positive], LossReduction::Sum).unwrap();
    let expected = std::f64::consts::LN_2 + (1.0 + (-1.0f64).exp()).ln();
    assert!((tape.value(loss).item().unwrap() - expected).abs() < 1e-12);
    let mean = batch_loss(&mut tape, logits, &[Negative, Positive], LossReduction::Mean).unwrap();
    assert!((tape.value(mean).item().unwrap() - expected / 2.0).abs() < 1e-12);
    assert!(matches!(
        batch_loss(&mut tape, logits, &[], LossReduction::Sum),
        Err(ModelError::EmptyBatch)
    ));
}

#[test]
fn isolated_user_sees_only_itself() {
    let g = small_graph();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let feats = features(&mut rng, &g, 3);
    let cfg = config(1, Ablation::Full);
    let params = ModelParams::init(&cfg, &mut rng).unwrap();
    let (_, h) = forward_rows(
        &g,
        &feats,
        &params,
        &cfg,
        &[NodeRef::user(3)],
        SampleMode::Replacement,
        1,
    );

    let x = feats.row(NodeRef::user(3));
    let w = &params.layers[0].combine;
    let pre: Vec<f64> = (0..4)
        .map(|o| (0..3).map(|i| w.row(o)[i] * x[i]).sum::<f64>().max(0.0))
        .collect();
    let norm = pre.iter().map(|v| v * v).sum::<f64>().sqrt();
    for (a, b) in h.data().iter().zip(&pre) {
        assert!((a - b / norm).abs() < 1e-14);
    }
}

#[test]
fn representations_are_unit_or_zero() {
    let g = small_graph();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let feats = features(&mut rng, &g, 3);
    for layers in 1..=3 {
        let cfg = config(layers, Ablation::Full);
        let params = ModelParams::init(&cfg, &mut rng).unwrap();
        let frontier = build_frontier(
            &g,
            &[NodeRef::user(0), NodeRef::user(3)],
            layers,
            3,
            3,
            SampleMode::Replacement,
            &mut rng,
        )
        .unwrap();
        let mut tape = Tape::new();
        let vars = params.register(&mut tape);
        let out = model_forward(&mut tape, &g, &frontier, &feats, &vars, &cfg, Mode::Train, &mut rng).unwrap();
        for (_, h) in &out.levels[1..] {
            let t = tape.value(*h);
            for r in 0..t.rows() {
                let n = t.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!(n == 0.0 || (n - 1.0).abs() < 1e-12, "norm {n}");
            }
        }
    }
}

#[test]
fn seeded_forward_is_bitwise_reproducible() {
    let g = small_graph();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let feats = features(&mut rng, &g, 3);
    let cfg = DoubleHConfig {
        dropout: 0.3,
        ..config(2, Ablation::Full)
    };
    let params = ModelParams::init(&cfg, &mut rng).unwrap();
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let frontier = build_frontier(
            &g,
            &[NodeRef::user(0), NodeRef::user(1)],
            2,
            3,
            3,
            SampleMode::Replacement,
            &mut rng,
        )
        .unwrap();
        let mut tape = Tape::new();
        let vars = params.register(&mut tape);
        let out = model_forward(&mut tape, &g, &frontier, &feats, &vars, &cfg, Mode::Train, &mut rng).unwrap();
        let bits: Vec<u64> = tape
            .value(out.embeddings())
            .data()
            .iter()
            .map(|v| v.to_bits())
            .collect();
        bits
    };
    assert_eq!(run(), run());
}

#[test]
fn ablations_ignore_the_dropped_channel() {
    let g = small_graph();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let feats = features(&mut rng, &g, 3);
    let batch = [NodeRef::user(0)];

    // u0's two-hop users are u0, u1, u2; its one-hop tweets are t0, t1.
    let mut two_hop_perturbed = feats.clone();
    for u in [1, 2] {
        for (i, v) in two_hop_perturbed.users.data_mut()[u * 3..u * 3 + 3]
            .iter_mut()
            .enumerate()
        {
            *v += 0.75 * i as f64;
        }
    }
    let mut one_hop_perturbed = feats.clone();
    for (i, v) in one_hop_perturbed.tweets.data_mut()[..6].iter_mut().enumerate() {
        *v -= 0.5 * (i % 3) as f64;
    }

    let cfg = config(1, Ablation::HeteroOnly);
    let params = ModelParams::init(&cfg, &mut rng).unwrap();
    let base = forward_rows(&g, &feats, &params, &cfg, &batch, SampleMode::Replacement, 3).1;
    let moved = forward_rows(
        &g,
        &two_hop_perturbed,
        &params,
        &cfg,
        &batch,
        SampleMode::Replacement,
        3,
    )
    .1;
    assert_eq!(base, moved);
    let touched = forward_rows(
        &g,
        &one_hop_perturbed,
        &params,
        &cfg,
        &batch,
        SampleMode::Replacement,
        3,
    )
    .1;
    assert_ne!(base, touched);

    let cfg = config(1, Ablation::HomoOnly);
    let base = forward_rows(&g, &feats, &params, &cfg, &batch, SampleMode::Replacement, 3).1;
    let moved = forward_rows(
        &g,
        &one_hop_perturbed,
        &params,
        &cfg,
        &batch,
        SampleMode::Replacement,
        3,
    )
    .1;
    assert_eq!(base, moved);
    let touched = forward_rows(
        &g,
        &two_hop_perturbed,
        &params,
        &cfg,
        &batch,
        SampleMode::Replacement,
        3,
    )
    .1;
    assert_ne!(base, touched);
}

#[test]
fn mismatched_inputs_are_rejected() {
    let g = small_graph();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let feats = features(&mut rng, &g, 3);
    let cfg = config(2, Ablation::Full);
    let params = ModelParams::init(&cfg, &mut rng).unwrap();
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);

    let shallow = build_frontier(&g, &[NodeRef::user(0)], 1, 3, 3, SampleMode::Replacement, &mut rng).unwrap();
    let err = model_forward(&mut tape, &g, &shallow, &feats, &vars, &cfg, Mode::Eval, &mut rng).unwrap_err();
    assert!(matches!(err, ModelError::FrontierMismatch(_)));

    let other_sizes = build_frontier(&g, &[NodeRef::user(0)], 2, 5, 3, SampleMode::Replacement, &mut rng).unwrap();
    let err = model_forward(&mut tape, &g, &other_sizes, &feats, &vars, &cfg, Mode::Eval, &mut rng).unwrap_err();
    assert!(matches!(err, ModelError::FrontierMismatch(_)));

    let narrow = features(&mut rng, &g, 2);
    let ok = build_frontier(&g, &[NodeRef::user(0)], 2, 3, 3, SampleMode::Replacement, &mut rng).unwrap();
    let err = model_forward(&mut tape, &g, &ok, &narrow, &vars, &cfg, Mode::Eval, &mut rng).unwrap_err();
    assert!(matches!(err, ModelError::Dimension(_)));
}

#[test]
fn params_shapes_and_order() {
    let cfg = DoubleHConfig {
        layers: 2,
        hidden: 5,
        feature_dim: 3,
        ..DoubleHConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let params = ModelParams::init(&cfg, &mut rng).unwrap();
    params.check(&cfg).unwrap();
    assert_eq!(params.transform(1, Hop::Two, NodeKind::Tweet).shape(), &[5, 3]);
    assert_eq!(params.transform(2, Hop::One, NodeKind::User).shape(), &[5, 5]);
    assert_eq!(params.layers[0].combine.shape(), &[5, 8]);
    assert_eq!(params.layers[1].combine.shape(), &[5, 10]);
    assert_eq!(params.tensors().len(), 2 * 5 + 2);

    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    for (v, t) in vars.all().iter().zip(params.tensors()) {
        assert_eq!(tape.value(*v), t);
    }
    assert!(ModelParams::init(
        &DoubleHConfig {
            layers: 4,
            ..cfg.clone()
        },
        &mut rng
    )
    .is_err());
    assert!(params.check(&DoubleHConfig { hidden: 6, ..cfg }).is_err());
}
