#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use doubleh::graph::{build_frontier, BipartiteGraph, EdgeKind, Interaction, NodeKind, NodeRef, SampleMode};
use doubleh::labeling::StanceLabel;
use doubleh::model::{
    batch_loss, model_forward, Ablation, Aggregation, DoubleHConfig, LossReduction, ModelParams, NodeFeatures,
};
use doubleh::tensor::{Mode, Tape, Tensor, Var};

pub const FD_STEP: f64 = 1e-5;

pub fn random_tensor(rng: &mut impl Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or the plain difference when both are tiny.
pub fn rel_err(a: &Tensor, b: &Tensor) -> f64 {
    let diff = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = a.l2_norm().max(b.l2_norm());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Central differences of `eval` with respect to every entry of every input.
pub fn numeric_gradient(inputs: &[Tensor], eval: &dyn Fn(&[Tensor]) -> f64) -> Vec<Tensor> {
    let mut out = Vec::with_capacity(inputs.len());
    for i in 0..inputs.len() {
        let mut g = inputs[i].clone();
        for j in 0..inputs[i].numel() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] -= FD_STEP;
            g.data_mut()[j] = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
        }
        out.push(g);
    }
    out
}

pub fn worst_rel_err(analytic: &[Tensor], numeric: &[Tensor]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| rel_err(a, n))
        .fold(0.0, f64::max)
}

/// Worst relative error between tape gradients and central differences of
/// the scalar `f` with respect to every input.
pub fn gradient_check(inputs: &[Tensor], f: &dyn Fn(&mut Tape, &[Var]) -> Var) -> f64 {
    let eval = |inputs: &[Tensor]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
        let out = f(&mut tape, &vars);
        tape.value(out).item().expect("scalar loss")
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&mut tape, &vars);
    let grads = tape.backward(out).unwrap();
    let analytic: Vec<Tensor> = vars.iter().map(|v| grads.wrt(*v)).collect();
    worst_rel_err(&analytic, &numeric_gradient(inputs, &eval))
}

/// Each primitive followed by a fixed random readout into a mean cross-entropy.
pub fn primitive_checks(seed: u64) -> Vec<(&'static str, f64)> {
    use doubleh::tensor::ScatterEntry;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_tensor(&mut rng, &[4, 3]);
    let y = random_tensor(&mut rng, &[4, 3]);
    let w = random_tensor(&mut rng, &[5, 3]);
    let b = random_tensor(&mut rng, &[5]);
    let head3 = random_tensor(&mut rng, &[2, 3]);
    let head5 = random_tensor(&mut rng, &[2, 5]);
    let head6 = random_tensor(&mut rng, &[2, 6]);
    let targets = [0usize, 1, 1, 0];

    let readout = |t: &mut Tape, v: Var, head: &Tensor| {
        let h = t.constant(head.clone());
        let logits = t.affine(v, h, None).unwrap();
        let ce = t.cross_entropy(logits, &targets[..t.value(logits).rows()]).unwrap();
        t.mean(ce).unwrap()
    };
    let mut out = Vec::new();
    out.push((
        "affine",
        gradient_check(&[x.clone(), w.clone(), b.clone()], &|t, v| {
            let a = t.affine(v[0], v[1], Some(v[2])).unwrap();
            readout(t, a, &head5)
        }),
    ));
    out.push((
        "layernorm",
        gradient_check(std::slice::from_ref(&x), &|t, v| {
            let a = t.layernorm(v[0], 1e-5).unwrap();
            readout(t, a, &head3)
        }),
    ));
    out.push((
        "relu",
        gradient_check(std::slice::from_ref(&x), &|t, v| {
            let a = t.relu(v[0]).unwrap();
            readout(t, a, &head3)
        }),
    ));
    out.push((
        "dropout",
        gradient_check(std::slice::from_ref(&x), &|t, v| {
            let mut mask_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd0);
            let a = t.dropout(v[0], 0.3, Mode::Train, &mut mask_rng).unwrap();
            readout(t, a, &head3)
        }),
    ));
    out.push((
        "l2_normalize",
        gradient_check(std::slice::from_ref(&x), &|t, v| {
            let a = t.l2_normalize(v[0], 1e-12).unwrap();
            readout(t, a, &head3)
        }),
    ));
    out.push((
        "cross_entropy",
        gradient_check(std::slice::from_ref(&x), &|t, v| {
            let ce = t.cross_entropy(v[0], &[0, 2, 1, 2]).unwrap();
            t.mean(ce).unwrap()
        }),
    ));
    out.push((
        "concat",
        gradient_check(&[x.clone(), y.clone()], &|t, v| {
            let a = t.concat(v[0], v[1]).unwrap();
            readout(t, a, &head6)
        }),
    ));
    out.push((
        "scatter",
        gradient_check(std::slice::from_ref(&x), &|t, v| {
            let entries = vec![
                ScatterEntry {
                    dst: 0,
                    src: 1,
                    weight: 1.0,
                },
                ScatterEntry {
                    dst: 0,
                    src: 3,
                    weight: 0.5,
                },
                ScatterEntry {
                    dst: 2,
                    src: 1,
                    weight: 2.0,
                },
                ScatterEntry {
                    dst: 1,
                    src: 0,
                    weight: 1.0,
                },
            ];
            let a = t.scatter(v[0], entries, 3).unwrap();
            readout(t, a, &head3)
        }),
    ));
    out.push((
        "gather_rows",
        gradient_check(std::slice::from_ref(&x), &|t, v| {
            let a = t.gather_rows(v[0], &[2, 0, 2, 1]).unwrap();
            readout(t, a, &head3)
        }),
    ));
    out.push((
        "add",
        gradient_check(&[x.clone(), y.clone()], &|t, v| {
            let a = t.add(v[0], v[1]).unwrap();
            readout(t, a, &head3)
        }),
    ));
    out.push((
        "sum",
        gradient_check(std::slice::from_ref(&x), &|t, v| {
            let ce = t.cross_entropy(v[0], &[1, 0, 2, 2]).unwrap();
            t.sum(ce).unwrap()
        }),
    ));
    out.push((
        "mean",
        gradient_check(std::slice::from_ref(&y), &|t, v| {
            let ce = t.cross_entropy(v[0], &[1, 0, 2, 2]).unwrap();
            t.mean(ce).unwrap()
        }),
    ));
    out
}

/// u0 posts t0, u1 retweets t0 and posts t1, u2 retweets t1.
pub fn five_node_graph() -> BipartiteGraph {
    BipartiteGraph::from_interactions(
        3,
        2,
        &[
            Interaction {
                user: 0,
                tweet: 0,
                kind: EdgeKind::Post,
            },
            Interaction {
                user: 1,
                tweet: 0,
                kind: EdgeKind::Retweet,
            },
            Interaction {
                user: 1,
                tweet: 1,
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

fn with_tensors(template: &ModelParams, tensors: &[Tensor]) -> ModelParams {
    let mut p = template.clone();
    for (slot, t) in p.tensors_mut().into_iter().zip(tensors) {
        *slot = t.clone();
    }
    p
}

/// Training-mode loss of the whole model and its tape gradients. The
/// sampler and dropout masks replay from `seed` on every call.
pub fn model_loss(
    graph: &BipartiteGraph,
    features: &NodeFeatures,
    cfg: &DoubleHConfig,
    params: &ModelParams,
    batch: &[NodeRef],
    gold: &[StanceLabel],
    seed: u64,
) -> (f64, Vec<Tensor>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frontier = build_frontier(
        graph,
        batch,
        cfg.layers,
        cfg.one_hop_size,
        cfg.two_hop_size,
        SampleMode::Replacement,
        &mut rng,
    )
    .unwrap();
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let out = model_forward(&mut tape, graph, &frontier, features, &vars, cfg, Mode::Train, &mut rng).unwrap();
    assert_eq!(out.nodes(), batch);
    let logits = tape
        .affine(out.embeddings(), vars.classifier_weight, Some(vars.classifier_bias))
        .unwrap();
    let loss = batch_loss(&mut tape, logits, gold, LossReduction::Mean).unwrap();
    let value = tape.value(loss).item().unwrap();
    let grads = tape.backward(loss).unwrap();
    (value, vars.all().into_iter().map(|v| grads.wrt(v)).collect())
}

/// Worst relative gradient error of the full loss on the five-node graph.
pub fn model_gradient_check(layers: usize, seed: u64) -> f64 {
    let graph = five_node_graph();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = DoubleHConfig {
        layers,
        hidden: 4,
        feature_dim: 3,
        dropout: 0.2,
        one_hop_size: 2,
        two_hop_size: 2,
        ..DoubleHConfig::default()
    };
    let features = NodeFeatures::new(random_tensor(&mut rng, &[3, 3]), random_tensor(&mut rng, &[2, 3])).unwrap();
    let mut params = ModelParams::init(&cfg, &mut rng).unwrap();
    // a nonzero bias exercises its gradient
    params.classifier_bias = random_tensor(&mut rng, &[2]);
    let batch = [NodeRef::user(0), NodeRef::user(1), NodeRef::user(2)];
    let gold = [StanceLabel::Positive, StanceLabel::Negative, StanceLabel::Positive];
    let (_, analytic) = model_loss(&graph, &features, &cfg, &params, &batch, &gold, seed);
    let flat: Vec<Tensor> = params.tensors().into_iter().cloned().collect();
    let numeric = numeric_gradient(&flat, &|ts| {
        model_loss(&graph, &features, &cfg, &with_tensors(&params, ts), &batch, &gold, seed).0
    });
    worst_rel_err(&analytic, &numeric)
}

/// Distinct (user, tweet) pairs: each tweet has one author and any other
/// connected user retweets it.
pub fn random_interactions(rng: &mut impl Rng, users: usize, tweets: usize, density: f64) -> Vec<Interaction> {
    let mut out = Vec::new();
    for tweet in 0..tweets {
        let author = rng.random_range(0..users);
        for user in 0..users {
            if user == author {
                out.push(Interaction {
                    user,
                    tweet,
                    kind: EdgeKind::Post,
                });
            } else if rng.random_bool(density) {
                out.push(Interaction {
                    user,
                    tweet,
                    kind: EdgeKind::Retweet,
                });
            }
        }
    }
    out
}

pub fn random_graph(rng: &mut impl Rng, max_nodes: usize) -> (BipartiteGraph, Vec<Interaction>) {
    let users = rng.random_range(1..max_nodes);
    let tweets = rng.random_range(1..=max_nodes - users);
    let density = rng.random_range(0.1..0.6);
    let edges = random_interactions(rng, users, tweets, density);
    (BipartiteGraph::from_interactions(users, tweets, &edges).unwrap(), edges)
}

/// Full-neighborhood DoubleH on dense adjacency, one row per node with users
/// first. Written from the layer equations alone.
pub struct DenseOracle {
    users: usize,
    kinds: Vec<NodeKind>,
    adj: Vec<Vec<f64>>,
}

type Mat = Vec<Vec<f64>>;

fn matvec(w: &Tensor, x: &[f64]) -> Vec<f64> {
    (0..w.rows())
        .map(|r| w.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn layernorm(x: &[f64]) -> Vec<f64> {
    let d = x.len() as f64;
    let mean = x.iter().sum::<f64>() / d;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d;
    x.iter().map(|v| (v - mean) / (var + 1e-5).sqrt()).collect()
}

fn relu(x: Vec<f64>) -> Vec<f64> {
    x.into_iter().map(|v| v.max(0.0)).collect()
}

impl DenseOracle {
    pub fn new(users: usize, tweets: usize, edges: &[Interaction]) -> Self {
        let n = users + tweets;
        let mut adj = vec![vec![0.0; n]; n];
        for e in edges {
            adj[e.user][users + e.tweet] = 1.0;
            adj[users + e.tweet][e.user] = 1.0;
        }
        let kinds = (0..n)
            .map(|i| if i < users { NodeKind::User } else { NodeKind::Tweet })
            .collect();
        Self { users, kinds, adj }
    }

    pub fn position(&self, v: NodeRef) -> usize {
        match v.kind {
            NodeKind::User => v.index,
            NodeKind::Tweet => self.users + v.index,
        }
    }

    /// Final-layer representation of every node.
    pub fn forward(&self, params: &ModelParams, cfg: &DoubleHConfig, x: &Mat) -> Mat {
        let n = self.adj.len();
        let deg: Vec<f64> = self.adj.iter().map(|r| r.iter().sum()).collect();
        let mut h = x.clone();
        for layer in &params.layers {
            let normed: Mat = h.iter().map(|r| layernorm(r)).collect();
            // t[hop][kind][node]
            let t: Vec<Vec<Mat>> = (0..2)
                .map(|hop| {
                    (0..2)
                        .map(|kind| {
                            normed
                                .iter()
                                .map(|r| relu(matvec(&layer.transforms[hop][kind], r)))
                                .collect()
                        })
                        .collect()
                })
                .collect();
            let (use1, use2) = match cfg.ablation {
                Ablation::Full => (true, true),
                Ablation::HeteroOnly => (true, false),
                Ablation::HomoOnly => (false, true),
            };
            let mut next = Vec::with_capacity(n);
            for u in 0..n {
                let kind = self.kinds[u].slot();
                let mut agg = vec![0.0; cfg.hidden];
                let mut count = 0.0;
                for w in 0..n {
                    if self.adj[u][w] == 0.0 {
                        continue;
                    }
                    if use1 {
                        for (a, v) in agg.iter_mut().zip(&t[0][kind][w]) {
                            *a += v;
                        }
                        count += 1.0;
                    }
                    if use2 {
                        for x2 in 0..n {
                            if self.adj[w][x2] != 0.0 {
                                for (a, v) in agg.iter_mut().zip(&t[1][kind][x2]) {
                                    *a += v;
                                }
                            }
                        }
                        count += deg[w];
                    }
                }
                if cfg.aggregation == Aggregation::Mean && count > 0.0 {
                    agg.iter_mut().for_each(|a| *a /= count);
                }
                let mut joined = h[u].clone();
                joined.extend(agg);
                let z = relu(matvec(&layer.combine, &joined));
                let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                next.push(z.into_iter().map(|v| v / norm).collect());
            }
            h = next;
        }
        h
    }
}

pub fn oracle_features(rng: &mut ChaCha8Rng, nodes: usize, dim: usize) -> Mat {
    (0..nodes)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

/// Recount of user labels: per-tweet candidate sets, integer ratio test.
/// Returns `user -> (positive, labeled, label)`, skipping users without labeled tweets.
pub fn brute_force_labels(
    tweets: &[(String, Vec<String>)],
    lexicon: &BTreeMap<String, String>,
    positive: &str,
) -> BTreeMap<String, (usize, usize, bool)> {
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (author, tags) in tweets {
        let candidates: BTreeSet<&String> = tags
            .iter()
            .filter_map(|t| lexicon.get(&t.trim_start_matches('#').to_lowercase()))
            .collect();
        if candidates.len() == 1 {
            let c = counts.entry(author.clone()).or_default();
            c.1 += 1;
            if *candidates.iter().next().unwrap() == positive {
                c.0 += 1;
            }
        }
    }
    counts.into_iter().map(|(u, (p, n))| (u, (p, n, 2 * p >= n))).collect()
}

pub struct Corpus {
    pub users: Vec<String>,
    /// `(author, hashtags)` per tweet.
    pub tweets: Vec<(String, Vec<String>)>,
    pub lexicon: BTreeMap<String, String>,
}

const TAG_POOL: [&str; 8] = [
    "bluewave", "resist", "votered", "maga", "forward", "kag", "news", "rain",
];

/// Up to 50 users with small tweet counts, so ties at one half are common.
/// Tags vary in case and `#` prefix.
pub fn random_corpus(rng: &mut impl Rng) -> Corpus {
    let mut lexicon = BTreeMap::new();
    lexicon.insert(TAG_POOL[0].to_string(), "blue".to_string());
    for tag in &TAG_POOL[1..6] {
        match rng.random_range(0..3) {
            0 => {
                lexicon.insert(tag.to_string(), "blue".to_string());
            }
            1 => {
                lexicon.insert(tag.to_string(), "red".to_string());
            }
            _ => {}
        }
    }
    let users: Vec<String> = (0..rng.random_range(1..=50)).map(|i| format!("u{i}")).collect();
    let mut tweets = Vec::new();
    for u in &users {
        for _ in 0..rng.random_range(0..5) {
            let tags = (0..rng.random_range(0..4))
                .map(|_| {
                    let tag = TAG_POOL[rng.random_range(0..TAG_POOL.len())];
                    let tag = if rng.random_bool(0.3) {
                        tag.to_uppercase()
                    } else {
                        tag.to_string()
                    };
                    if rng.random_bool(0.5) {
                        format!("#{tag}")
                    } else {
                        tag
                    }
                })
                .collect();
            tweets.push((u.clone(), tags));
        }
    }
    Corpus { users, tweets, lexicon }
}

/// Pipeline labels compared to [`brute_force_labels`]; `Err` names the first mismatch.
pub fn check_corpus(corpus: &Corpus) -> Result<usize, String> {
    use doubleh::data::{Dataset, TweetRecord, UserRecord};
    use doubleh::labeling::{label_users, HashtagLexicon, LabelPolicy};

    let ds = Dataset {
        users: corpus
            .users
            .iter()
            .map(|id| UserRecord {
                id: id.clone(),
                profile: String::new(),
                location: None,
                extra: None,
            })
            .collect(),
        tweets: corpus
            .tweets
            .iter()
            .enumerate()
            .map(|(i, (author, tags))| TweetRecord {
                id: format!("t{i}"),
                author_id: author.clone(),
                text: tags.join(" "),
                hashtags: tags.clone(),
                retweet_of: None,
            })
            .collect(),
        ..Dataset::default()
    };
    ds.validate().map_err(|e| e.to_string())?;
    let lexicon = HashtagLexicon::new("blue", corpus.lexicon.clone()).map_err(|e| e.to_string())?;
    let got = label_users(
        &corpus.users,
        ds.authored_hashtags(),
        &lexicon,
        &LabelPolicy::new(0.5).unwrap(),
    );
    let want = brute_force_labels(&corpus.tweets, &corpus.lexicon, "blue");
    if got.len() != want.len() {
        return Err(format!("{} labeled users, expected {}", got.len(), want.len()));
    }
    let mut ties = 0;
    for l in &got {
        let &(p, n, positive) = want
            .get(&l.user_id)
            .ok_or(format!("{} should be unlabeled", l.user_id))?;
        let f = p as f64 / n as f64;
        if l.f_u != Some(f) || l.labeled_tweet_count != n || (l.label == StanceLabel::Positive) != positive {
            return Err(format!(
                "{}: got {l:?}, expected f_u {p}/{n}, positive {positive}",
                l.user_id
            ));
        }
        if 2 * p == n {
            ties += 1;
        }
    }
    Ok(ties)
}
