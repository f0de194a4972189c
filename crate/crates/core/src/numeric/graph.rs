//! Tape-based reverse-mode differentiation over rank-2 tensors.
//!
//! Every op appends a node holding its value; [`Graph::backward`] walks the
//! tape in reverse. Row vectors (`[1, n]`) broadcast over rows in `add`,
//! `sub` and `mul`.

use std::collections::BTreeMap;

use super::{NumericError, ParameterStore, Tensor};

/// Fill value used for masked logits: finite, and `exp` of it underflows to 0.
pub const MASK_VALUE: f64 = -1.0e30;

const NORM_EPS: f64 = 1e-5;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Softmax(Var),
    LogSoftmax(Var),
    Sigmoid(Var),
    Relu(Var),
    LayerNorm { x: Var, gain: Var, bias: Var },
    GroupNorm { x: Var, groups: usize, gain: Var, bias: Var },
    Embed { table: Var, indices: Vec<usize> },
    MaskedFill { x: Var, mask: Vec<bool> },
    ConcatCols(Vec<Var>),
    SliceCols { x: Var, start: usize },
    SliceRows { x: Var, start: usize },
    Transpose(Var),
    Reshape(Var),
    Sum(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// The op names supported by [`Graph`].
pub fn op_set() -> &'static [&'static str] {
    &[
        "matmul",
        "add",
        "mul",
        "softmax",
        "log_softmax",
        "sigmoid",
        "relu",
        "layer_norm",
        "group_norm",
        "embed_lookup",
        "masked_fill",
        "concat",
        "slice",
        "reduce_sum",
        "sub",
        "scale",
        "transpose",
        "reshape",
    ]
}

/// Computation tape. One graph per forward/backward pass; not shared across
/// threads.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Parameter name to leaf mapping for one graph.
#[derive(Debug, Clone, Default)]
pub struct BoundParams {
    vars: BTreeMap<String, Var>,
}

impl BoundParams {
    pub fn get(&self, name: &str) -> Var {
        *self
            .vars
            .get(name)
            .unwrap_or_else(|| panic!("parameter '{name}' not bound"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Var)> {
        self.vars.iter()
    }
}

/// Gradients of a scalar with respect to every node that requires them.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Per-parameter gradients; parameters not reached get zeros.
    pub fn for_params(&self, graph: &Graph, bound: &BoundParams) -> BTreeMap<String, Tensor> {
        bound
            .iter()
            .map(|(name, &v)| {
                let g = self.get(v).cloned().unwrap_or_else(|| {
                    let shape = graph.value(v).shape().to_vec();
                    Tensor::new(shape.clone(), vec![0.0; shape.iter().product()])
                        .expect("shape product")
                });
                (name.clone(), g)
            })
            .collect()
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> NumericError {
    NumericError::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

fn require_matrix(op: &'static str, t: &Tensor) -> Result<(), NumericError> {
    if t.is_matrix() {
        Ok(())
    } else {
        Err(NumericError::NotMatrix {
            op,
            shape: t.shape().to_vec(),
        })
    }
}

/// Elementwise combination with optional row broadcast of `b`.
fn broadcast_zip(
    op: &'static str,
    a: &Tensor,
    b: &Tensor,
    f: impl Fn(f64, f64) -> f64,
) -> Result<Tensor, NumericError> {
    require_matrix(op, a)?;
    require_matrix(op, b)?;
    let (r, c) = (a.rows(), a.cols());
    if b.shape() == a.shape() {
        let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
        Ok(Tensor::matrix(r, c, data))
    } else if b.rows() == 1 && b.cols() == c {
        let bd = b.data();
        let data = a
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| f(x, bd[i % c]))
            .collect();
        Ok(Tensor::matrix(r, c, data))
    } else {
        Err(shape_err(op, a, b))
    }
}

/// Reduces a gradient of `a`'s shape to `b`'s shape (sums broadcast rows).
fn unbroadcast(g: &Tensor, target: &[usize]) -> Tensor {
    if g.shape() == target {
        return g.clone();
    }
    let c = g.cols();
    let mut out = vec![0.0; c];
    for r in 0..g.rows() {
        for (o, v) in out.iter_mut().zip(g.row_slice(r)) {
            *o += v;
        }
    }
    Tensor::matrix(1, c, out)
}

fn softmax_rows(x: &Tensor) -> Tensor {
    let (r, c) = (x.rows(), x.cols());
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        let row = x.row_slice(i);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for (j, &v) in row.iter().enumerate() {
            let e = (v - m).exp();
            out[i * c + j] = e;
            z += e;
        }
        for j in 0..c {
            out[i * c + j] /= z;
        }
    }
    Tensor::matrix(r, c, out)
}

fn log_softmax_rows(x: &Tensor) -> Tensor {
    let (r, c) = (x.rows(), x.cols());
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        let row = x.row_slice(i);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
        for (j, &v) in row.iter().enumerate() {
            out[i * c + j] = v - lse;
        }
    }
    Tensor::matrix(r, c, out)
}

/// Normalizes each contiguous chunk of `width` columns in every row; returns
/// normalized values and per-chunk inverse standard deviations.
fn normalize_chunks(x: &Tensor, width: usize) -> (Tensor, Vec<f64>) {
    let (r, c) = (x.rows(), x.cols());
    let chunks = c / width;
    let mut out = vec![0.0; r * c];
    let mut inv_std = Vec::with_capacity(r * chunks);
    for i in 0..r {
        for g in 0..chunks {
            let base = i * c + g * width;
            let vals = &x.data()[base..base + width];
            // shifted mean: exact for constant chunks
            let shift = vals[0];
            let mean = shift + vals.iter().map(|v| v - shift).sum::<f64>() / width as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / width as f64;
            let inv = 1.0 / (var + NORM_EPS).sqrt();
            for k in 0..width {
                out[base + k] = (vals[k] - mean) * inv;
            }
            inv_std.push(inv);
        }
    }
    (Tensor::matrix(r, c, out), inv_std)
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Convenience accessor for `[1, 1]` nodes.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data()[0]
    }

    fn push(&mut self, op: &'static str, value: Tensor, node_op: Op, inputs: &[Var]) -> Result<Var, NumericError> {
        if !value.all_finite() {
            return Err(NumericError::NonFinite { op });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op: node_op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// A leaf that receives gradients.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// A leaf without gradients.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Registers every tensor in the store as a gradient leaf.
    pub fn bind(&mut self, store: &ParameterStore) -> BoundParams {
        let vars = store
            .iter()
            .map(|(name, t)| (name.to_string(), self.param(t.clone())))
            .collect();
        BoundParams { vars }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericError> {
        let (ta, tb) = (self.value(a), self.value(b));
        require_matrix("matmul", ta)?;
        require_matrix("matmul", tb)?;
        if ta.cols() != tb.rows() {
            return Err(shape_err("matmul", ta, tb));
        }
        let out = ta.matmul(tb);
        self.push("matmul", out, Op::MatMul(a, b), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericError> {
        let out = broadcast_zip("add", self.value(a), self.value(b), |x, y| x + y)?;
        self.push("add", out, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumericError> {
        let out = broadcast_zip("sub", self.value(a), self.value(b), |x, y| x - y)?;
        self.push("sub", out, Op::Sub(a, b), &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumericError> {
        let out = broadcast_zip("mul", self.value(a), self.value(b), |x, y| x * y)?;
        self.push("mul", out, Op::Mul(a, b), &[a, b])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, NumericError> {
        let out = self.value(a).scale(c);
        self.push("scale", out, Op::Scale(a, c), &[a])
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Result<Var, NumericError> {
        require_matrix("softmax", self.value(a))?;
        let out = softmax_rows(self.value(a));
        self.push("softmax", out, Op::Softmax(a), &[a])
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var, NumericError> {
        require_matrix("log_softmax", self.value(a))?;
        let out = log_softmax_rows(self.value(a));
        self.push("log_softmax", out, Op::LogSoftmax(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, NumericError> {
        let out = self.value(a).map(|v| 1.0 / (1.0 + (-v).exp()));
        self.push("sigmoid", out, Op::Sigmoid(a), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, NumericError> {
        let out = self.value(a).map(|v| v.max(0.0));
        self.push("relu", out, Op::Relu(a), &[a])
    }

    /// Per-row normalization with `[1, d]` gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var, NumericError> {
        let d = self.value(x).cols();
        self.norm("layer_norm", x, d, gain, bias, Op::LayerNorm { x, gain, bias })
    }

    /// Normalizes each of `groups` contiguous column blocks per row, then
    /// applies a `[1, d]` gain and bias.
    pub fn group_norm(
        &mut self,
        x: Var,
        groups: usize,
        gain: Var,
        bias: Var,
    ) -> Result<Var, NumericError> {
        let d = self.value(x).cols();
        if groups == 0 || !d.is_multiple_of(groups) {
            return Err(NumericError::InvalidArgument(format!(
                "group_norm: {d} columns not divisible into {groups} groups"
            )));
        }
        let op = Op::GroupNorm {
            x,
            groups,
            gain,
            bias,
        };
        self.norm("group_norm", x, d / groups, gain, bias, op)
    }

    fn norm(
        &mut self,
        op: &'static str,
        x: Var,
        width: usize,
        gain: Var,
        bias: Var,
        node_op: Op,
    ) -> Result<Var, NumericError> {
        let tx = self.value(x);
        require_matrix(op, tx)?;
        let d = tx.cols();
        for p in [gain, bias] {
            let tp = self.value(p);
            if tp.shape() != [1, d] {
                return Err(shape_err(op, tx, tp));
            }
        }
        let (xhat, _) = normalize_chunks(tx, width);
        let g = self.value(gain).data().to_vec();
        let b = self.value(bias).data().to_vec();
        let mut out = xhat;
        let cols = out.cols();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            let j = i % cols;
            *v = *v * g[j] + b[j];
        }
        self.push(op, out, node_op, &[x, gain, bias])
    }

    /// Gathers rows of `table`.
    pub fn embed(&mut self, table: Var, indices: &[usize]) -> Result<Var, NumericError> {
        let t = self.value(table);
        require_matrix("embed_lookup", t)?;
        let (v, d) = (t.rows(), t.cols());
        let mut out = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            if i >= v {
                return Err(NumericError::InvalidArgument(format!(
                    "embed_lookup: index {i} out of range for {v} rows"
                )));
            }
            out.extend_from_slice(t.row_slice(i));
        }
        let out = Tensor::matrix(indices.len(), d, out);
        self.push(
            "embed_lookup",
            out,
            Op::Embed {
                table,
                indices: indices.to_vec(),
            },
            &[table],
        )
    }

    /// Replaces entries where `mask` is true with `value`.
    pub fn masked_fill(&mut self, x: Var, mask: &[bool], value: f64) -> Result<Var, NumericError> {
        let t = self.value(x);
        if mask.len() != t.len() {
            return Err(NumericError::InvalidArgument(format!(
                "masked_fill: mask length {} for shape {:?}",
                mask.len(),
                t.shape()
            )));
        }
        let data = t
            .data()
            .iter()
            .zip(mask)
            .map(|(&v, &m)| if m { value } else { v })
            .collect();
        let out = Tensor::new(t.shape().to_vec(), data)?;
        self.push(
            "masked_fill",
            out,
            Op::MaskedFill {
                x,
                mask: mask.to_vec(),
            },
            &[x],
        )
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NumericError> {
        let first = self.value(parts[0]);
        require_matrix("concat", first)?;
        let r = first.rows();
        for &p in parts {
            let t = self.value(p);
            require_matrix("concat", t)?;
            if t.rows() != r {
                return Err(shape_err("concat", first, t));
            }
        }
        let c: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Vec::with_capacity(r * c);
        for i in 0..r {
            for &p in parts {
                out.extend_from_slice(self.value(p).row_slice(i));
            }
        }
        let out = Tensor::matrix(r, c, out);
        self.push("concat", out, Op::ConcatCols(parts.to_vec()), parts)
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var, NumericError> {
        let t = self.value(x);
        require_matrix("slice", t)?;
        if start > end || end > t.cols() {
            return Err(NumericError::InvalidArgument(format!(
                "slice: columns {start}..{end} of {:?}",
                t.shape()
            )));
        }
        let w = end - start;
        let mut out = Vec::with_capacity(t.rows() * w);
        for i in 0..t.rows() {
            out.extend_from_slice(&t.row_slice(i)[start..end]);
        }
        let out = Tensor::matrix(t.rows(), w, out);
        self.push("slice", out, Op::SliceCols { x, start }, &[x])
    }

    /// Rows `start..end`.
    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Result<Var, NumericError> {
        let t = self.value(x);
        require_matrix("slice", t)?;
        if start > end || end > t.rows() {
            return Err(NumericError::InvalidArgument(format!(
                "slice: rows {start}..{end} of {:?}",
                t.shape()
            )));
        }
        let c = t.cols();
        let out = Tensor::matrix(end - start, c, t.data()[start * c..end * c].to_vec());
        self.push("slice", out, Op::SliceRows { x, start }, &[x])
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var, NumericError> {
        require_matrix("transpose", self.value(x))?;
        let out = self.value(x).transpose();
        self.push("transpose", out, Op::Transpose(x), &[x])
    }

    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Result<Var, NumericError> {
        let out = self.value(x).clone().reshaped(vec![rows, cols])?;
        self.push("reshape", out, Op::Reshape(x), &[x])
    }

    /// Sum of all entries as a `[1, 1]` node.
    pub fn sum(&mut self, x: Var) -> Result<Var, NumericError> {
        let out = Tensor::scalar(self.value(x).sum());
        self.push("reduce_sum", out, Op::Sum(x), &[x])
    }

    /// Reverse sweep from a `[1, 1]` output.
    pub fn backward(&self, output: Var) -> Result<Gradients, NumericError> {
        let out = self.value(output);
        if out.len() != 1 {
            return Err(NumericError::NonScalarOutput {
                shape: out.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(Tensor::new(out.shape().to_vec(), vec![1.0])?);

        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let y = &node.value;
            match &node.op {
                Op::Leaf => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    self.accumulate(&mut grads, *a, || g.matmul(&tb.transpose()));
                    self.accumulate(&mut grads, *b, || ta.transpose().matmul(&g));
                }
                Op::Add(a, b) => {
                    let bs = self.value(*b).shape().to_vec();
                    self.accumulate(&mut grads, *a, || g.clone());
                    self.accumulate(&mut grads, *b, || unbroadcast(&g, &bs));
                }
                Op::Sub(a, b) => {
                    let bs = self.value(*b).shape().to_vec();
                    self.accumulate(&mut grads, *a, || g.clone());
                    self.accumulate(&mut grads, *b, || unbroadcast(&g, &bs).scale(-1.0));
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    self.accumulate(&mut grads, *a, || {
                        broadcast_zip("mul", &g, tb, |x, y| x * y).expect("forward shapes")
                    });
                    self.accumulate(&mut grads, *b, || {
                        let full = Tensor::matrix(
                            g.rows(),
                            g.cols(),
                            g.data().iter().zip(ta.data()).map(|(x, y)| x * y).collect(),
                        );
                        unbroadcast(&full, tb.shape())
                    });
                }
                Op::Scale(a, c) => {
                    self.accumulate(&mut grads, *a, || g.scale(*c));
                }
                Op::Softmax(a) => {
                    self.accumulate(&mut grads, *a, || {
                        let (r, c) = (y.rows(), y.cols());
                        let mut out = vec![0.0; r * c];
                        for i in 0..r {
                            let yr = y.row_slice(i);
                            let gr = g.row_slice(i);
                            let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                            for j in 0..c {
                                out[i * c + j] = yr[j] * (gr[j] - dot);
                            }
                        }
                        Tensor::matrix(r, c, out)
                    });
                }
                Op::LogSoftmax(a) => {
                    self.accumulate(&mut grads, *a, || {
                        let (r, c) = (y.rows(), y.cols());
                        let mut out = vec![0.0; r * c];
                        for i in 0..r {
                            let yr = y.row_slice(i);
                            let gr = g.row_slice(i);
                            let total: f64 = gr.iter().sum();
                            for j in 0..c {
                                out[i * c + j] = gr[j] - yr[j].exp() * total;
                            }
                        }
                        Tensor::matrix(r, c, out)
                    });
                }
                Op::Sigmoid(a) => {
                    self.accumulate(&mut grads, *a, || {
                        let data = g
                            .data()
                            .iter()
                            .zip(y.data())
                            .map(|(gv, s)| gv * s * (1.0 - s))
                            .collect();
                        Tensor::new(y.shape().to_vec(), data).expect("shape")
                    });
                }
                Op::Relu(a) => {
                    let ta = self.value(*a);
                    self.accumulate(&mut grads, *a, || {
                        let data = g
                            .data()
                            .iter()
                            .zip(ta.data())
                            .map(|(gv, x)| if *x > 0.0 { *gv } else { 0.0 })
                            .collect();
                        Tensor::new(ta.shape().to_vec(), data).expect("shape")
                    });
                }
                Op::LayerNorm { x, gain, bias } => {
                    let width = self.value(*x).cols();
                    self.norm_backward(&mut grads, &g, *x, width, *gain, *bias);
                }
                Op::GroupNorm {
                    x,
                    groups,
                    gain,
                    bias,
                } => {
                    let width = self.value(*x).cols() / groups;
                    self.norm_backward(&mut grads, &g, *x, width, *gain, *bias);
                }
                Op::Embed { table, indices } => {
                    let t = self.value(*table);
                    self.accumulate(&mut grads, *table, || {
                        let mut out = Tensor::zeros(t.rows(), t.cols());
                        let d = t.cols();
                        for (r, &idx) in indices.iter().enumerate() {
                            for k in 0..d {
                                let v = out.get(idx, k) + g.get(r, k);
                                out.set(idx, k, v);
                            }
                        }
                        out
                    });
                }
                Op::MaskedFill { x, mask } => {
                    self.accumulate(&mut grads, *x, || {
                        let data = g
                            .data()
                            .iter()
                            .zip(mask)
                            .map(|(&v, &m)| if m { 0.0 } else { v })
                            .collect();
                        Tensor::new(g.shape().to_vec(), data).expect("shape")
                    });
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        let start = offset;
                        self.accumulate(&mut grads, p, || {
                            let mut out = Vec::with_capacity(g.rows() * w);
                            for r in 0..g.rows() {
                                out.extend_from_slice(&g.row_slice(r)[start..start + w]);
                            }
                            Tensor::matrix(g.rows(), w, out)
                        });
                        offset += w;
                    }
                }
                Op::SliceCols { x, start } => {
                    let t = self.value(*x);
                    self.accumulate(&mut grads, *x, || {
                        let mut out = Tensor::zeros(t.rows(), t.cols());
                        for r in 0..g.rows() {
                            for k in 0..g.cols() {
                                out.set(r, start + k, g.get(r, k));
                            }
                        }
                        out
                    });
                }
                Op::SliceRows { x, start } => {
                    let t = self.value(*x);
                    self.accumulate(&mut grads, *x, || {
                        let mut out = Tensor::zeros(t.rows(), t.cols());
                        let c = t.cols();
                        out.data_mut()[start * c..start * c + g.len()].copy_from_slice(g.data());
                        out
                    });
                }
                Op::Transpose(x) => {
                    self.accumulate(&mut grads, *x, || g.transpose());
                }
                Op::Reshape(x) => {
                    let shape = self.value(*x).shape().to_vec();
                    self.accumulate(&mut grads, *x, || {
                        g.clone().reshaped(shape.clone()).expect("same size")
                    });
                }
                Op::Sum(x) => {
                    let t = self.value(*x);
                    let gv = g.data()[0];
                    self.accumulate(&mut grads, *x, || {
                        Tensor::new(t.shape().to_vec(), vec![gv; t.len()]).expect("shape")
                    });
                }
            }
        }
        for g in grads.iter().flatten() {
            if !g.all_finite() {
                return Err(NumericError::NonFinite { op: "backward" });
            }
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, f: impl FnOnce() -> Tensor) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        let g = f();
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn norm_backward(
        &self,
        grads: &mut [Option<Tensor>],
        g: &Tensor,
        x: Var,
        width: usize,
        gain: Var,
        bias: Var,
    ) {
        let tx = self.value(x);
        let (xhat, inv_std) = normalize_chunks(tx, width);
        let gains = self.value(gain).data().to_vec();
        let (r, c) = (tx.rows(), tx.cols());
        self.accumulate(grads, gain, || {
            let mut out = vec![0.0; c];
            for i in 0..r * c {
                out[i % c] += g.data()[i] * xhat.data()[i];
            }
            Tensor::matrix(1, c, out)
        });
        self.accumulate(grads, bias, || unbroadcast(g, &[1, c]));
        self.accumulate(grads, x, || {
            let chunks = c / width;
            let mut out = vec![0.0; r * c];
            for i in 0..r {
                for ch in 0..chunks {
                    let base = i * c + ch * width;
                    let inv = inv_std[i * chunks + ch];
                    let mut mean_dxhat = 0.0;
                    let mut mean_dxhat_xhat = 0.0;
                    for k in 0..width {
                        let dxh = g.data()[base + k] * gains[ch * width + k];
                        mean_dxhat += dxh;
                        mean_dxhat_xhat += dxh * xhat.data()[base + k];
                    }
                    mean_dxhat /= width as f64;
                    mean_dxhat_xhat /= width as f64;
                    for k in 0..width {
                        let dxh = g.data()[base + k] * gains[ch * width + k];
                        out[base + k] =
                            inv * (dxh - mean_dxhat - xhat.data()[base + k] * mean_dxhat_xhat);
                    }
                }
            }
            Tensor::matrix(r, c, out)
        });
    }
}
