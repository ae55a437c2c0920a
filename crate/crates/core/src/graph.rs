//! Recorded computation graph with reverse-mode differentiation.
//!
//! Every op evaluates eagerly and appends a node; inputs always have smaller
//! ids than the node that consumes them, so the graph is acyclic by
//! construction and [`Graph::backward`] is a single sweep over decreasing ids.
//!
//! Reductions (`sum_rows`, `group_sum`, scatter-adds) run sequentially from
//! the first row to the last. Reordering operands therefore changes results
//! only by floating-point rounding.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::params::ParameterStore;
use crate::tensor::{self, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unary {
    Relu,
    Sigmoid,
    Tanh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Binary {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Binary(Binary, usize, usize),
    AddRow(usize, usize),
    MulRow(usize, usize),
    Unary(Unary, usize),
    Scale(usize, f64),
    Concat { inputs: Vec<usize>, axis: usize },
    Narrow { input: usize, axis: usize, start: usize, len: usize },
    Reshape(usize),
    SumRows(usize),
    GroupSum { input: usize, group: usize },
    Gather { table: usize, ids: Vec<usize> },
    Select { mask: Vec<bool>, a: usize, b: usize },
    SumSquares(usize),
    SoftmaxCrossEntropy { logits: usize, labels: Vec<usize> },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Append-only tape of tensor operations.
pub struct Graph {
    nodes: Vec<Node>,
    params: Vec<(usize, String)>,
    param_ids: HashMap<String, usize>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

/// Adjoints of every node reached from the loss.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<Tensor> {
        let g = self.grads.get(id.0)?.as_ref()?;
        Tensor::new(self.shapes[id.0].clone(), g.clone()).ok()
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            params: Vec::new(),
            param_ids: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    /// A leaf that does not receive gradients.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    /// A differentiable leaf that is not bound to a stored parameter.
    pub fn variable(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, true)
    }

    /// Binds a stored parameter. Repeated calls with the same name return the same node.
    pub fn param(&mut self, store: &ParameterStore, name: &str) -> Result<NodeId> {
        if let Some(&id) = self.param_ids.get(name) {
            return Ok(NodeId(id));
        }
        let value = store
            .value(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))?
            .clone();
        let id = self.push(value, Op::Leaf, true);
        self.params.push((id.0, name.to_string()));
        self.param_ids.insert(name.to_string(), id.0);
        Ok(id)
    }

    /// Names of parameters bound into this graph, in binding order.
    pub fn bound_params(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|(_, n)| n.as_str())
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn record(&mut self, op: Op) -> Result<NodeId> {
        let value = evaluate(&op, |i| &self.nodes[i].value)?;
        let requires_grad = inputs(&op).iter().any(|&i| self.nodes[i].requires_grad);
        Ok(self.push(value, op, requires_grad))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::MatMul(a.0, b.0))
    }

    pub fn binary(&mut self, op: Binary, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::Binary(op, a.0, b.0))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(Binary::Sub, a, b)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(Binary::Mul, a, b)
    }

    /// `a[r×c] + row[c]` broadcast over rows (bias addition).
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        self.record(Op::AddRow(a.0, row.0))
    }

    /// `a[r×c] ⊙ row[c]` broadcast over rows (diagonal weights).
    pub fn mul_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        self.record(Op::MulRow(a.0, row.0))
    }

    pub fn unary(&mut self, op: Unary, a: NodeId) -> Result<NodeId> {
        self.record(Op::Unary(op, a.0))
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(Unary::Relu, a)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(Unary::Sigmoid, a)
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(Unary::Tanh, a)
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId> {
        self.record(Op::Scale(a.0, factor))
    }

    pub fn concat(&mut self, parts: &[NodeId], axis: usize) -> Result<NodeId> {
        self.record(Op::Concat {
            inputs: parts.iter().map(|p| p.0).collect(),
            axis,
        })
    }

    /// Slice `len` entries starting at `start` along `axis`.
    pub fn narrow(&mut self, a: NodeId, axis: usize, start: usize, len: usize) -> Result<NodeId> {
        self.record(Op::Narrow {
            input: a.0,
            axis,
            start,
            len,
        })
    }

    pub fn reshape(&mut self, a: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        let value = self.nodes[a.0].value.reshape(shape)?;
        let requires_grad = self.nodes[a.0].requires_grad;
        Ok(self.push(value, Op::Reshape(a.0), requires_grad))
    }

    /// Column-wise sum of an `[n×d]` matrix, giving `[d]`.
    pub fn sum_rows(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::SumRows(a.0))
    }

    /// Sums consecutive blocks of `group` rows: `[r×d]` → `[r/group × d]`.
    pub fn group_sum(&mut self, a: NodeId, group: usize) -> Result<NodeId> {
        self.record(Op::GroupSum { input: a.0, group })
    }

    /// Row gather `table[ids]`; the adjoint scatter-adds into the table.
    pub fn gather_rows(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId> {
        self.record(Op::Gather {
            table: table.0,
            ids: ids.to_vec(),
        })
    }

    /// Row-wise choice: row `i` comes from `a` when `mask[i]`, else from `b`.
    pub fn select_rows(&mut self, mask: &[bool], a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::Select {
            mask: mask.to_vec(),
            a: a.0,
            b: b.0,
        })
    }

    pub fn sum_squares(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(Op::SumSquares(a.0))
    }

    /// Mean over the batch of `-log softmax(logits)[label]`.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        self.record(Op::SoftmaxCrossEntropy {
            logits: logits.0,
            labels: labels.to_vec(),
        })
    }

    /// Smallest `|x|` over all ReLU inputs, or `None` without ReLUs.
    pub fn relu_margin(&self) -> Option<f64> {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Unary(Unary::Relu, a) => Some(&self.nodes[a].value),
                _ => None,
            })
            .flat_map(|t| t.data().iter().map(|x| x.abs()))
            .reduce(f64::min)
    }

    /// Re-evaluates every recorded op from the stored leaf values.
    pub fn replay(&self) -> Result<Vec<Tensor>> {
        let mut values: Vec<Tensor> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node.op {
                Op::Leaf => node.value.clone(),
                Op::Reshape(a) => values[a].reshape(node.value.shape().to_vec())?,
                ref op => evaluate(op, |i| &values[i])?,
            };
            values.push(v);
        }
        Ok(values)
    }

    /// Adjoints of `loss` with respect to every node it depends on.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let loss_value = &self.nodes[loss.0].value;
        if loss_value.len() != 1 {
            return Err(Error::NonScalarLoss(loss_value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            if self.nodes[id].requires_grad {
                self.propagate(id, &g, &mut grads);
            }
            grads[id] = Some(g);
        }
        let shapes = self.nodes[..=loss.0]
            .iter()
            .map(|n| n.value.shape().to_vec())
            .collect();
        Ok(Gradients { grads, shapes })
    }

    /// Runs [`Graph::backward`] and adds parameter adjoints to the store's accumulators.
    pub fn backward_into(&self, loss: NodeId, store: &mut ParameterStore) -> Result<()> {
        let grads = self.backward(loss)?;
        for (id, name) in &self.params {
            if let Some(Some(g)) = grads.grads.get(*id) {
                store.accumulate_grad(name, g)?;
            }
        }
        Ok(())
    }

    fn wants(&self, i: usize) -> bool {
        self.nodes[i].requires_grad
    }

    fn propagate(&self, id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |i: usize| &self.nodes[i].value;
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (r, k) = val(*a).dims2().expect("matmul lhs");
                let c = val(*b).shape()[1];
                if self.wants(*a) {
                    accumulate(grads, *a, tensor::matmul_nt(g, val(*b).data(), r, k, c));
                }
                if self.wants(*b) {
                    accumulate(grads, *b, tensor::matmul_tn(val(*a).data(), g, r, k, c));
                }
            }
            Op::Binary(op, a, b) => {
                let (a, b) = (*a, *b);
                match op {
                    Binary::Add => {
                        if self.wants(a) {
                            accumulate(grads, a, g.to_vec());
                        }
                        if self.wants(b) {
                            accumulate(grads, b, g.to_vec());
                        }
                    }
                    Binary::Sub => {
                        if self.wants(a) {
                            accumulate(grads, a, g.to_vec());
                        }
                        if self.wants(b) {
                            accumulate(grads, b, g.iter().map(|v| -v).collect());
                        }
                    }
                    Binary::Mul => {
                        if self.wants(a) {
                            let d = g.iter().zip(val(b).data()).map(|(g, y)| g * y).collect();
                            accumulate(grads, a, d);
                        }
                        if self.wants(b) {
                            let d = g.iter().zip(val(a).data()).map(|(g, x)| g * x).collect();
                            accumulate(grads, b, d);
                        }
                    }
                }
            }
            Op::AddRow(a, row) => {
                let c = val(*row).len();
                if self.wants(*a) {
                    accumulate(grads, *a, g.to_vec());
                }
                if self.wants(*row) {
                    let mut d = vec![0.0; c];
                    for g_row in g.chunks_exact(c) {
                        for (s, v) in d.iter_mut().zip(g_row) {
                            *s += v;
                        }
                    }
                    accumulate(grads, *row, d);
                }
            }
            Op::MulRow(a, row) => {
                let w = val(*row).data();
                let c = w.len();
                if self.wants(*a) {
                    let d = g
                        .chunks_exact(c)
                        .flat_map(|g_row| g_row.iter().zip(w).map(|(g, w)| g * w))
                        .collect();
                    accumulate(grads, *a, d);
                }
                if self.wants(*row) {
                    let mut d = vec![0.0; c];
                    for (g_row, x_row) in g.chunks_exact(c).zip(val(*a).data().chunks_exact(c)) {
                        for ((s, g), x) in d.iter_mut().zip(g_row).zip(x_row) {
                            *s += g * x;
                        }
                    }
                    accumulate(grads, *row, d);
                }
            }
            Op::Unary(op, a) => {
                if !self.wants(*a) {
                    return;
                }
                let y = self.nodes[id].value.data();
                let d = match op {
                    Unary::Relu => g
                        .iter()
                        .zip(y)
                        .map(|(g, y)| if *y > 0.0 { *g } else { 0.0 })
                        .collect(),
                    Unary::Sigmoid => g.iter().zip(y).map(|(g, y)| g * y * (1.0 - y)).collect(),
                    Unary::Tanh => g.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect(),
                };
                accumulate(grads, *a, d);
            }
            Op::Scale(a, factor) => {
                if self.wants(*a) {
                    accumulate(grads, *a, g.iter().map(|v| v * factor).collect());
                }
            }
            Op::Concat { inputs, axis } => {
                let out_shape = self.nodes[id].value.shape();
                let (outer, _, inner) = split_axis(out_shape, *axis);
                let out_block = out_shape[*axis] * inner;
                let mut offset = 0;
                for &input in inputs {
                    let block = val(input).shape()[*axis] * inner;
                    if self.wants(input) {
                        let mut d = Vec::with_capacity(outer * block);
                        for o in 0..outer {
                            let start = o * out_block + offset;
                            d.extend_from_slice(&g[start..start + block]);
                        }
                        accumulate(grads, input, d);
                    }
                    offset += block;
                }
            }
            Op::Narrow {
                input,
                axis,
                start,
                len,
            } => {
                if !self.wants(*input) {
                    return;
                }
                let in_shape = val(*input).shape();
                let (outer, mid, inner) = split_axis(in_shape, *axis);
                let mut d = vec![0.0; outer * mid * inner];
                let block = len * inner;
                for o in 0..outer {
                    let dst = o * mid * inner + start * inner;
                    d[dst..dst + block].copy_from_slice(&g[o * block..(o + 1) * block]);
                }
                accumulate(grads, *input, d);
            }
            Op::Reshape(a) => {
                if self.wants(*a) {
                    accumulate(grads, *a, g.to_vec());
                }
            }
            Op::SumRows(a) => {
                if self.wants(*a) {
                    let rows = val(*a).shape()[0];
                    let d = (0..rows).flat_map(|_| g.iter().copied()).collect();
                    accumulate(grads, *a, d);
                }
            }
            Op::GroupSum { input, group } => {
                if self.wants(*input) {
                    let c = g.len() / self.nodes[id].value.shape()[0];
                    let d = g
                        .chunks_exact(c)
                        .flat_map(|row| (0..*group).flat_map(move |_| row.iter().copied()))
                        .collect();
                    accumulate(grads, *input, d);
                }
            }
            Op::Gather { table, ids } => {
                if !self.wants(*table) {
                    return;
                }
                let t = val(*table);
                let c = t.len() / t.shape()[0];
                let mut d = vec![0.0; t.len()];
                for (g_row, &row) in g.chunks_exact(c).zip(ids) {
                    for (s, v) in d[row * c..(row + 1) * c].iter_mut().zip(g_row) {
                        *s += v;
                    }
                }
                accumulate(grads, *table, d);
            }
            Op::Select { mask, a, b } => {
                let c = g.len() / mask.len();
                for (target, keep) in [(*a, true), (*b, false)] {
                    if !self.wants(target) {
                        continue;
                    }
                    let d = g
                        .chunks_exact(c)
                        .zip(mask)
                        .flat_map(|(row, &m)| {
                            row.iter().map(move |&v| if m == keep { v } else { 0.0 })
                        })
                        .collect();
                    accumulate(grads, target, d);
                }
            }
            Op::SumSquares(a) => {
                if self.wants(*a) {
                    let d = val(*a).data().iter().map(|x| 2.0 * x * g[0]).collect();
                    accumulate(grads, *a, d);
                }
            }
            Op::SoftmaxCrossEntropy { logits, labels } => {
                if !self.wants(*logits) {
                    return;
                }
                let z = val(*logits);
                let (batch, classes) = z.dims2().expect("logits");
                let scale = g[0] / batch as f64;
                let mut d = softmax_rows(z.data(), classes);
                for (row, &label) in d.chunks_exact_mut(classes).zip(labels) {
                    row[label] -= 1.0;
                    for v in row.iter_mut() {
                        *v *= scale;
                    }
                }
                accumulate(grads, *logits, d);
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], idx: usize, delta: Vec<f64>) {
    match &mut grads[idx] {
        Some(existing) => {
            for (e, d) in existing.iter_mut().zip(delta) {
                *e += d;
            }
        }
        slot @ None => *slot = Some(delta),
    }
}

fn inputs(op: &Op) -> Vec<usize> {
    match op {
        Op::Leaf => vec![],
        Op::MatMul(a, b)
        | Op::Binary(_, a, b)
        | Op::AddRow(a, b)
        | Op::MulRow(a, b)
        | Op::Select { a, b, .. } => vec![*a, *b],
        Op::Unary(_, a)
        | Op::Scale(a, _)
        | Op::Reshape(a)
        | Op::SumRows(a)
        | Op::SumSquares(a)
        | Op::Narrow { input: a, .. }
        | Op::GroupSum { input: a, .. }
        | Op::Gather { table: a, .. }
        | Op::SoftmaxCrossEntropy { logits: a, .. } => vec![*a],
        Op::Concat { inputs, .. } => inputs.clone(),
    }
}

/// `(outer, axis size, inner)` view of a shape around `axis`.
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// Row-wise softmax with per-row max subtraction.
pub(crate) fn softmax_rows(z: &[f64], classes: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(z.len());
    for row in z.chunks_exact(classes) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        out.extend(exps.into_iter().map(|e| e / total));
    }
    out
}

fn evaluate<'a>(op: &Op, get: impl Fn(usize) -> &'a Tensor) -> Result<Tensor> {
    match op {
        Op::Leaf | Op::Reshape(_) => unreachable!("leaves and reshapes are not re-evaluated"),
        Op::MatMul(a, b) => {
            let (a, b) = (get(*a), get(*b));
            let (r, k) = a.dims2().map_err(|_| Error::shape("matmul", a.shape(), b.shape()))?;
            let (k2, c) = b.dims2().map_err(|_| Error::shape("matmul", a.shape(), b.shape()))?;
            if k != k2 {
                return Err(Error::shape("matmul", a.shape(), b.shape()));
            }
            Tensor::matrix(r, c, tensor::matmul(a.data(), b.data(), r, k, c))
        }
        Op::Binary(op, a, b) => {
            let (a, b) = (get(*a), get(*b));
            if a.shape() != b.shape() {
                return Err(Error::shape("elementwise", a.shape(), b.shape()));
            }
            let f: fn(f64, f64) -> f64 = match op {
                Binary::Add => |x, y| x + y,
                Binary::Sub => |x, y| x - y,
                Binary::Mul => |x, y| x * y,
            };
            let data = a.data().iter().zip(b.data()).map(|(x, y)| f(*x, *y)).collect();
            Tensor::new(a.shape().to_vec(), data)
        }
        Op::AddRow(a, row) | Op::MulRow(a, row) => {
            let (a_t, row_t) = (get(*a), get(*row));
            let name = if matches!(op, Op::AddRow(..)) { "add_row" } else { "mul_row" };
            let (_, c) = a_t.dims2().map_err(|_| Error::shape(name, a_t.shape(), row_t.shape()))?;
            if row_t.shape() != [c] {
                return Err(Error::shape(name, a_t.shape(), row_t.shape()));
            }
            let w = row_t.data();
            let data = a_t
                .data()
                .chunks_exact(c)
                .flat_map(|r| {
                    r.iter().zip(w).map(|(x, w)| match op {
                        Op::AddRow(..) => x + w,
                        _ => x * w,
                    })
                })
                .collect();
            Tensor::new(a_t.shape().to_vec(), data)
        }
        Op::Unary(op, a) => {
            let a = get(*a);
            let f: fn(f64) -> f64 = match op {
                Unary::Relu => |x| if x > 0.0 { x } else { 0.0 },
                Unary::Sigmoid => tensor::sigmoid,
                Unary::Tanh => f64::tanh,
            };
            Tensor::new(a.shape().to_vec(), a.data().iter().map(|&x| f(x)).collect())
        }
        Op::Scale(a, factor) => {
            let a = get(*a);
            Tensor::new(a.shape().to_vec(), a.data().iter().map(|x| x * factor).collect())
        }
        Op::Concat { inputs, axis } => {
            let parts: Vec<&Tensor> = inputs.iter().map(|&i| get(i)).collect();
            let first = parts
                .first()
                .ok_or_else(|| Error::InvalidTensor("concat of zero tensors".into()))?;
            if *axis >= first.shape().len() {
                return Err(Error::Index {
                    op: "concat",
                    index: *axis,
                    size: first.shape().len(),
                });
            }
            let mut out_shape = first.shape().to_vec();
            out_shape[*axis] = 0;
            for p in &parts {
                let compatible = p.shape().len() == first.shape().len()
                    && p.shape()
                        .iter()
                        .zip(first.shape())
                        .enumerate()
                        .all(|(d, (x, y))| d == *axis || x == y);
                if !compatible {
                    return Err(Error::shape("concat", first.shape(), p.shape()));
                }
                out_shape[*axis] += p.shape()[*axis];
            }
            let (outer, _, inner) = split_axis(&out_shape, *axis);
            let mut data = Vec::with_capacity(out_shape.iter().product());
            for o in 0..outer {
                for p in &parts {
                    let block = p.shape()[*axis] * inner;
                    data.extend_from_slice(&p.data()[o * block..(o + 1) * block]);
                }
            }
            Tensor::new(out_shape, data)
        }
        Op::Narrow {
            input,
            axis,
            start,
            len,
        } => {
            let a = get(*input);
            if *axis >= a.shape().len() {
                return Err(Error::Index {
                    op: "narrow",
                    index: *axis,
                    size: a.shape().len(),
                });
            }
            if *len == 0 || start + len > a.shape()[*axis] {
                return Err(Error::Index {
                    op: "narrow",
                    index: start + len,
                    size: a.shape()[*axis],
                });
            }
            let (outer, mid, inner) = split_axis(a.shape(), *axis);
            let mut data = Vec::with_capacity(outer * len * inner);
            for o in 0..outer {
                let src = o * mid * inner + start * inner;
                data.extend_from_slice(&a.data()[src..src + len * inner]);
            }
            let mut shape = a.shape().to_vec();
            shape[*axis] = *len;
            Tensor::new(shape, data)
        }
        Op::SumRows(a) => {
            let a = get(*a);
            let (_, c) = a.dims2()?;
            let mut out = vec![0.0; c];
            for row in a.data().chunks_exact(c) {
                for (s, v) in out.iter_mut().zip(row) {
                    *s += v;
                }
            }
            Tensor::vector(out)
        }
        Op::GroupSum { input, group } => {
            let a = get(*input);
            let (r, c) = a.dims2()?;
            if *group == 0 || r % group != 0 {
                return Err(Error::shape("group_sum", a.shape(), &[*group]));
            }
            let mut out = vec![0.0; (r / group) * c];
            for (out_row, block) in out.chunks_exact_mut(c).zip(a.data().chunks_exact(group * c)) {
                for row in block.chunks_exact(c) {
                    for (s, v) in out_row.iter_mut().zip(row) {
                        *s += v;
                    }
                }
            }
            Tensor::matrix(r / group, c, out)
        }
        Op::Gather { table, ids } => {
            let t = get(*table);
            let (v, c) = t.dims2()?;
            if ids.is_empty() {
                return Err(Error::InvalidTensor("gather with no ids".into()));
            }
            let mut data = Vec::with_capacity(ids.len() * c);
            for &id in ids {
                if id >= v {
                    return Err(Error::Index {
                        op: "gather_rows",
                        index: id,
                        size: v,
                    });
                }
                data.extend_from_slice(&t.data()[id * c..(id + 1) * c]);
            }
            Tensor::matrix(ids.len(), c, data)
        }
        Op::Select { mask, a, b } => {
            let (a, b) = (get(*a), get(*b));
            if a.shape() != b.shape() || a.shape()[0] != mask.len() {
                return Err(Error::shape("select_rows", a.shape(), b.shape()));
            }
            let c = a.len() / mask.len();
            let data = mask
                .iter()
                .enumerate()
                .flat_map(|(i, &m)| {
                    let src = if m { a } else { b };
                    src.data()[i * c..(i + 1) * c].iter().copied()
                })
                .collect();
            Tensor::new(a.shape().to_vec(), data)
        }
        Op::SumSquares(a) => Ok(Tensor::scalar(get(*a).sum_squares())),
        Op::SoftmaxCrossEntropy { logits, labels } => {
            let z = get(*logits);
            let (batch, classes) = z.dims2()?;
            if labels.len() != batch {
                return Err(Error::shape("softmax_cross_entropy", z.shape(), &[labels.len()]));
            }
            let mut total = 0.0;
            for (row, &label) in z.data().chunks_exact(classes).zip(labels) {
                if label >= classes {
                    return Err(Error::Index {
                        op: "softmax_cross_entropy",
                        index: label,
                        size: classes,
                    });
                }
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                total += lse - row[label];
            }
            Ok(Tensor::scalar(total / batch as f64))
        }
    }
}
