//! Reverse-mode differentiation over a linear record of operations.
//!
//! Every operation appends a node holding its value and whatever the
//! backward rule needs. Nodes only ever reference earlier nodes, so the
//! record is already in topological order and the backward pass is a
//! single reverse sweep.

use rand::Rng;

use super::{Mode, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// One contribution of a row scatter: `out[dst] += weight * src[src]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterEntry {
    pub dst: usize,
    pub src: usize,
    pub weight: f64,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Affine {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    LayerNorm {
        x: Var,
        normalized: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Relu {
        x: Var,
    },
    Dropout {
        x: Var,
        mask: Vec<f64>,
    },
    L2Normalize {
        x: Var,
        norms: Vec<f64>,
        eps: f64,
    },
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Vec<f64>,
    },
    Concat {
        a: Var,
        b: Var,
    },
    Scatter {
        src: Var,
        entries: Vec<ScatterEntry>,
    },
    Add {
        a: Var,
        b: Var,
    },
    Sum {
        x: Var,
    },
    Mean {
        x: Var,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    requires_grad: bool,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every node on the tape.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient for `v`, or zeros of its shape when the loss does not depend on it.
    pub fn wrt(&self, v: Var) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(&self.shapes[v.0]))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Class probabilities saved by a cross-entropy node.
    pub fn probabilities(&self, v: Var) -> Option<Tensor> {
        match &self.nodes[v.0].op {
            Op::CrossEntropy { logits, probs, .. } => {
                Some(Tensor::from_parts(self.value(*logits).shape().to_vec(), probs.clone()))
            }
            _ => None,
        }
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, inputs: &[Var], op: Op) -> Result<Var, TensorError> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: op_name });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Row-wise `x Wᵀ + b`. `x` is `[d_in]` or `[n, d_in]`, `w` is `[d_out, d_in]`.
    pub fn affine(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var, TensorError> {
        let (xv, wv) = (self.value(x), self.value(w));
        if wv.rank() != 2 || wv.cols() != xv.cols() || xv.rank() == 0 {
            return Err(TensorError::ShapeMismatch {
                op: "affine",
                detail: format!("x {:?} vs W {:?}", xv.shape(), wv.shape()),
            });
        }
        let (n, d_in, d_out) = (xv.rows(), xv.cols(), wv.rows());
        if let Some(b) = b {
            let bv = self.value(b);
            if bv.rank() != 1 || bv.numel() != d_out {
                return Err(TensorError::ShapeMismatch {
                    op: "affine",
                    detail: format!("bias {:?} vs W {:?}", bv.shape(), wv.shape()),
                });
            }
        }
        let bias = b.map(|b| self.value(b).data());
        let (xd, wd) = (xv.data(), wv.data());
        let mut out = vec![0.0; n * d_out];
        for r in 0..n {
            let xr = &xd[r * d_in..(r + 1) * d_in];
            for o in 0..d_out {
                let wr = &wd[o * d_in..(o + 1) * d_in];
                let mut acc = bias.map_or(0.0, |b| b[o]);
                for (a, c) in xr.iter().zip(wr) {
                    acc += a * c;
                }
                out[r * d_out + o] = acc;
            }
        }
        let value = Tensor::from_parts(xv.row_shape(d_out), out);
        let mut inputs = vec![x, w];
        inputs.extend(b);
        self.push("affine", value, &inputs, Op::Affine { x, w, b })
    }

    /// Row-wise `(x - mean) / sqrt(var + eps)` with population variance.
    pub fn layernorm(&mut self, x: Var, eps: f64) -> Result<Var, TensorError> {
        let xv = self.value(x);
        let (n, d) = (xv.rows(), xv.cols());
        if d == 0 || xv.rank() == 0 {
            return Err(TensorError::InvalidArgument("layernorm needs d >= 1".into()));
        }
        let mut out = vec![0.0; n * d];
        let mut inv_std = Vec::with_capacity(n);
        for r in 0..n {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + eps).sqrt();
            for (o, v) in out[r * d..(r + 1) * d].iter_mut().zip(row) {
                *o = (v - mean) * inv;
            }
            inv_std.push(inv);
        }
        let value = Tensor::from_parts(xv.shape().to_vec(), out.clone());
        self.push(
            "layernorm",
            value,
            &[x],
            Op::LayerNorm {
                x,
                normalized: out,
                inv_std,
            },
        )
    }

    pub fn relu(&mut self, x: Var) -> Result<Var, TensorError> {
        let xv = self.value(x);
        let out = xv.data().iter().map(|v| v.max(0.0)).collect();
        let value = Tensor::from_parts(xv.shape().to_vec(), out);
        self.push("relu", value, &[x], Op::Relu { x })
    }

    /// Inverted dropout: in training each entry is zeroed with probability `p`
    /// and survivors are scaled by `1 / (1 - p)`. Evaluation is the identity
    /// and draws nothing from `rng`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, mode: Mode, rng: &mut R) -> Result<Var, TensorError> {
        if !(0.0..1.0).contains(&p) {
            return Err(TensorError::InvalidArgument(format!(
                "dropout probability {p} outside [0, 1)"
            )));
        }
        if mode == Mode::Eval || p == 0.0 {
            return Ok(x);
        }
        let xv = self.value(x);
        let scale = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..xv.numel())
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { scale })
            .collect();
        let out = xv.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = Tensor::from_parts(xv.shape().to_vec(), out);
        self.push("dropout", value, &[x], Op::Dropout { x, mask })
    }

    /// Row-wise `x / max(‖x‖₂, eps)`.
    pub fn l2_normalize(&mut self, x: Var, eps: f64) -> Result<Var, TensorError> {
        let xv = self.value(x);
        let (n, d) = (xv.rows(), xv.cols());
        let mut out = vec![0.0; n * d];
        let mut norms = Vec::with_capacity(n);
        for r in 0..n {
            let row = xv.row(r);
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            let denom = norm.max(eps);
            for (o, v) in out[r * d..(r + 1) * d].iter_mut().zip(row) {
                *o = v / denom;
            }
            norms.push(norm);
        }
        let value = Tensor::from_parts(xv.shape().to_vec(), out);
        self.push("l2_normalize", value, &[x], Op::L2Normalize { x, norms, eps })
    }

    /// Per-row softmax cross-entropy against integer targets. Returns the
    /// vector of per-row losses; the probabilities stay on the node.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var, TensorError> {
        let lv = self.value(logits);
        let (n, c) = (lv.rows(), lv.cols());
        if c < 2 || lv.rank() == 0 {
            return Err(TensorError::InvalidArgument(
                "cross entropy needs at least 2 classes".into(),
            ));
        }
        if targets.len() != n {
            return Err(TensorError::ShapeMismatch {
                op: "cross_entropy",
                detail: format!("{n} rows vs {} targets", targets.len()),
            });
        }
        let mut probs = vec![0.0; n * c];
        let mut losses = Vec::with_capacity(n);
        for (r, &t) in targets.iter().enumerate() {
            if t >= c {
                return Err(TensorError::TargetOutOfRange { target: t, classes: c });
            }
            let (loss, p) = super::softmax_cross_entropy(lv.row(r), t)?;
            probs[r * c..(r + 1) * c].copy_from_slice(&p);
            losses.push(loss);
        }
        let value = Tensor::from_parts(vec![n], losses);
        self.push(
            "cross_entropy",
            value,
            &[logits],
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        )
    }

    /// Column-wise concatenation `[a | b]` with matching row counts.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rows() != bv.rows() || av.rank() != bv.rank() || av.rank() == 0 {
            return Err(TensorError::ShapeMismatch {
                op: "concat",
                detail: format!("{:?} vs {:?}", av.shape(), bv.shape()),
            });
        }
        let (ca, cb) = (av.cols(), bv.cols());
        let mut out = Vec::with_capacity(av.numel() + bv.numel());
        for r in 0..av.rows() {
            out.extend_from_slice(av.row(r));
            out.extend_from_slice(bv.row(r));
        }
        let value = Tensor::from_parts(av.row_shape(ca + cb), out);
        self.push("concat", value, &[a, b], Op::Concat { a, b })
    }

    /// Weighted row scatter into a fresh `[out_rows, d]` matrix.
    pub fn scatter(&mut self, src: Var, entries: Vec<ScatterEntry>, out_rows: usize) -> Result<Var, TensorError> {
        let sv = self.value(src);
        let d = sv.cols();
        let mut out = vec![0.0; out_rows * d];
        for e in &entries {
            if e.dst >= out_rows || e.src >= sv.rows() {
                return Err(TensorError::ShapeMismatch {
                    op: "scatter",
                    detail: format!("entry {e:?} outside {out_rows}x{} from {}", d, sv.rows()),
                });
            }
            let row = sv.row(e.src);
            for (o, v) in out[e.dst * d..(e.dst + 1) * d].iter_mut().zip(row) {
                *o += e.weight * v;
            }
        }
        let value = Tensor::from_parts(vec![out_rows, d], out);
        self.push("scatter", value, &[src], Op::Scatter { src, entries })
    }

    /// Select rows of a matrix, in order, repeats allowed.
    pub fn gather_rows(&mut self, src: Var, rows: &[usize]) -> Result<Var, TensorError> {
        let entries = rows
            .iter()
            .enumerate()
            .map(|(dst, &src)| ScatterEntry { dst, src, weight: 1.0 })
            .collect();
        self.scatter(src, entries, rows.len())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "add",
                detail: format!("{:?} vs {:?}", av.shape(), bv.shape()),
            });
        }
        let out = av.data().iter().zip(bv.data()).map(|(x, y)| x + y).collect();
        let value = Tensor::from_parts(av.shape().to_vec(), out);
        self.push("add", value, &[a, b], Op::Add { a, b })
    }

    pub fn sum(&mut self, x: Var) -> Result<Var, TensorError> {
        let total = self.value(x).data().iter().sum();
        self.push("sum", Tensor::scalar(total), &[x], Op::Sum { x })
    }

    pub fn mean(&mut self, x: Var) -> Result<Var, TensorError> {
        let xv = self.value(x);
        if xv.numel() == 0 {
            return Err(TensorError::InvalidArgument("mean of empty tensor".into()));
        }
        let m = xv.data().iter().sum::<f64>() / xv.numel() as f64;
        self.push("mean", Tensor::scalar(m), &[x], Op::Mean { x })
    }

    /// Reverse sweep from a scalar node. Every node is visited once.
    pub fn backward(&self, loss: Var) -> Result<Gradients, TensorError> {
        let lv = self.value(loss);
        if lv.numel() != 1 {
            return Err(TensorError::NotScalar {
                shape: lv.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::from_parts(lv.shape().to_vec(), vec![1.0]));

        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[id] = Some(g);
        }

        let mut all = grads;
        all.resize(self.nodes.len(), None);
        Ok(Gradients {
            grads: all,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, contribution: Tensor) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&contribution),
            slot @ None => *slot = Some(contribution),
        }
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::Affine { x, w, b } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                let (n, d_in, d_out) = (xv.rows(), xv.cols(), wv.rows());
                let (xd, wd) = (xv.data(), wv.data());
                if self.nodes[x.0].requires_grad {
                    let mut gx = vec![0.0; n * d_in];
                    for r in 0..n {
                        for o in 0..d_out {
                            let go = gd[r * d_out + o];
                            if go == 0.0 {
                                continue;
                            }
                            for (acc, wv) in gx[r * d_in..(r + 1) * d_in]
                                .iter_mut()
                                .zip(&wd[o * d_in..(o + 1) * d_in])
                            {
                                *acc += go * wv;
                            }
                        }
                    }
                    self.accumulate(grads, *x, Tensor::from_parts(xv.shape().to_vec(), gx));
                }
                if self.nodes[w.0].requires_grad {
                    let mut gw = vec![0.0; d_out * d_in];
                    for r in 0..n {
                        let xr = &xd[r * d_in..(r + 1) * d_in];
                        for o in 0..d_out {
                            let go = gd[r * d_out + o];
                            if go == 0.0 {
                                continue;
                            }
                            for (acc, xv) in gw[o * d_in..(o + 1) * d_in].iter_mut().zip(xr) {
                                *acc += go * xv;
                            }
                        }
                    }
                    self.accumulate(grads, *w, Tensor::from_parts(wv.shape().to_vec(), gw));
                }
                if let Some(b) = b {
                    let mut gb = vec![0.0; d_out];
                    for r in 0..n {
                        for (acc, go) in gb.iter_mut().zip(&gd[r * d_out..(r + 1) * d_out]) {
                            *acc += go;
                        }
                    }
                    self.accumulate(grads, *b, Tensor::from_parts(vec![d_out], gb));
                }
            }
            Op::LayerNorm { x, normalized, inv_std } => {
                let xv = self.value(*x);
                let (n, d) = (xv.rows(), xv.cols());
                let df = d as f64;
                let mut gx = vec![0.0; n * d];
                for r in 0..n {
                    let gr = &gd[r * d..(r + 1) * d];
                    let yr = &normalized[r * d..(r + 1) * d];
                    let sum_g: f64 = gr.iter().sum();
                    let sum_gy: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                    let inv = inv_std[r];
                    for i in 0..d {
                        gx[r * d + i] = inv / df * (df * gr[i] - sum_g - yr[i] * sum_gy);
                    }
                }
                self.accumulate(grads, *x, Tensor::from_parts(xv.shape().to_vec(), gx));
            }
            Op::Relu { x } => {
                let xv = self.value(*x);
                let gx = xv
                    .data()
                    .iter()
                    .zip(gd)
                    .map(|(v, g)| if *v > 0.0 { *g } else { 0.0 })
                    .collect();
                self.accumulate(grads, *x, Tensor::from_parts(xv.shape().to_vec(), gx));
            }
            Op::Dropout { x, mask } => {
                let gx = gd.iter().zip(mask).map(|(g, m)| g * m).collect();
                self.accumulate(grads, *x, Tensor::from_parts(g.shape().to_vec(), gx));
            }
            Op::L2Normalize { x, norms, eps } => {
                let xv = self.value(*x);
                let y = node.value.data();
                let (n, d) = (xv.rows(), xv.cols());
                let mut gx = vec![0.0; n * d];
                for r in 0..n {
                    let gr = &gd[r * d..(r + 1) * d];
                    let yr = &y[r * d..(r + 1) * d];
                    let out = &mut gx[r * d..(r + 1) * d];
                    if norms[r] > *eps {
                        let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                        for i in 0..d {
                            out[i] = (gr[i] - yr[i] * dot) / norms[r];
                        }
                    } else {
                        for i in 0..d {
                            out[i] = gr[i] / eps;
                        }
                    }
                }
                self.accumulate(grads, *x, Tensor::from_parts(xv.shape().to_vec(), gx));
            }
            Op::CrossEntropy { logits, targets, probs } => {
                let lv = self.value(*logits);
                let c = lv.cols();
                let mut gl = probs.clone();
                for (r, &t) in targets.iter().enumerate() {
                    gl[r * c + t] -= 1.0;
                    for v in &mut gl[r * c..(r + 1) * c] {
                        *v *= gd[r];
                    }
                }
                self.accumulate(grads, *logits, Tensor::from_parts(lv.shape().to_vec(), gl));
            }
            Op::Concat { a, b } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (ca, cb) = (av.cols(), bv.cols());
                let mut ga = Vec::with_capacity(av.numel());
                let mut gb = Vec::with_capacity(bv.numel());
                for r in 0..av.rows() {
                    let row = &gd[r * (ca + cb)..(r + 1) * (ca + cb)];
                    ga.extend_from_slice(&row[..ca]);
                    gb.extend_from_slice(&row[ca..]);
                }
                self.accumulate(grads, *a, Tensor::from_parts(av.shape().to_vec(), ga));
                self.accumulate(grads, *b, Tensor::from_parts(bv.shape().to_vec(), gb));
            }
            Op::Scatter { src, entries } => {
                let sv = self.value(*src);
                let d = sv.cols();
                let mut gs = vec![0.0; sv.numel()];
                for e in entries {
                    let from = &gd[e.dst * d..(e.dst + 1) * d];
                    for (acc, v) in gs[e.src * d..(e.src + 1) * d].iter_mut().zip(from) {
                        *acc += e.weight * v;
                    }
                }
                self.accumulate(grads, *src, Tensor::from_parts(sv.shape().to_vec(), gs));
            }
            Op::Add { a, b } => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sum { x } => {
                let xv = self.value(*x);
                let gx = vec![gd[0]; xv.numel()];
                self.accumulate(grads, *x, Tensor::from_parts(xv.shape().to_vec(), gx));
            }
            Op::Mean { x } => {
                let xv = self.value(*x);
                let gx = vec![gd[0] / xv.numel() as f64; xv.numel()];
                self.accumulate(grads, *x, Tensor::from_parts(xv.shape().to_vec(), gx));
            }
        }
    }
}
