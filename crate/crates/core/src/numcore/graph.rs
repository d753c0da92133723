//! Define-by-run computation graph with reverse-mode differentiation.
//!
//! Every builder method records one primitive application and evaluates it
//! immediately, so a [`Graph`] is always a topologically ordered list: an
//! input always precedes its consumers. Leaves created with [`Graph::input`]
//! can later be rebound and the whole graph replayed with
//! [`Graph::evaluate`]; replay runs exactly the same kernels and so
//! reproduces outputs bit-for-bit.
//!
//! Three kinds of leaves exist:
//!
//! * constants ([`Graph::input`]) carry no gradient;
//! * variables ([`Graph::variable`]) receive gradients in the
//!   [`Gradients`] returned by [`Graph::backward`];
//! * parameters ([`Graph::param`]) borrow a tensor from a
//!   [`ParamStore`] and accumulate their gradient into a [`GradStore`].
//!
//! Gradients accumulate: calling `backward` twice without
//! [`GradStore::zero`] in between sums both contributions. The training loop
//! relies on this to accumulate over the sentences of a batch.

use crate::error::{Error, Result};
use crate::numcore::{GradStore, ParamId, ParamStore, Tensor};

/// Index of a node inside its [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive applied at a node.
#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Input,
    Variable,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    /// Concatenation along the last axis.
    Concat(Vec<NodeId>),
    /// Concatenation along the first axis.
    ConcatRows(Vec<NodeId>),
    SliceCols(NodeId, usize, usize),
    SliceRows(NodeId, usize, usize),
    Reshape(NodeId, usize, usize),
    SoftmaxRows(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    Elu(NodeId),
    LeakyRelu(NodeId, f64),
    Gather { table: NodeId, ids: Vec<usize> },
    Sum(NodeId),
    Mean(NodeId),
    MaskedFill { input: NodeId, mask: Vec<bool>, value: f64 },
    /// Mean token-level cross-entropy of row-wise logits against class ids.
    CrossEntropy { logits: NodeId, targets: Vec<usize> },
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Variable => "variable",
            Op::Param(_) => "param",
            Op::MatMul(..) => "matmul",
            Op::Transpose(_) => "transpose",
            Op::Add(..) => "add",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Concat(_) => "concat",
            Op::ConcatRows(_) => "concat_rows",
            Op::SliceCols(..) => "slice_cols",
            Op::SliceRows(..) => "slice_rows",
            Op::Reshape(..) => "reshape",
            Op::SoftmaxRows(_) => "softmax",
            Op::Sigmoid(_) => "sigmoid",
            Op::Tanh(_) => "tanh",
            Op::Relu(_) => "relu",
            Op::Elu(_) => "elu",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::Gather { .. } => "gather",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
            Op::MaskedFill { .. } => "masked_fill",
            Op::CrossEntropy { .. } => "cross_entropy",
        }
    }

    pub fn inputs(&self) -> Vec<NodeId> {
        match self {
            Op::Input | Op::Variable | Op::Param(_) => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::Concat(xs) | Op::ConcatRows(xs) => xs.clone(),
            Op::Transpose(a)
            | Op::Scale(a, _)
            | Op::SliceCols(a, ..)
            | Op::SliceRows(a, ..)
            | Op::Reshape(a, ..)
            | Op::SoftmaxRows(a)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::Relu(a)
            | Op::Elu(a)
            | Op::LeakyRelu(a, _)
            | Op::Sum(a)
            | Op::Mean(a) => vec![*a],
            Op::Gather { table, .. } => vec![*table],
            Op::MaskedFill { input, .. } => vec![*input],
            Op::CrossEntropy { logits, .. } => vec![*logits],
        }
    }
}

enum Value<'a> {
    Owned(Tensor),
    Borrowed(&'a Tensor),
}

impl Value<'_> {
    fn tensor(&self) -> &Tensor {
        match self {
            Value::Owned(t) => t,
            Value::Borrowed(t) => t,
        }
    }
}

struct Node<'a> {
    op: Op,
    value: Value<'a>,
    needs_grad: bool,
}

/// Gradients of a loss with respect to every differentiable node.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, node: NodeId) -> Option<&[f64]> {
        self.grads.get(node.0).and_then(|g| g.as_deref())
    }
}

#[derive(Default)]
pub struct Graph<'a> {
    nodes: Vec<Node<'a>>,
    stale: bool,
}

impl<'a> Graph<'a> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new(), stale: false }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        self.nodes[id.0].value.tensor()
    }

    pub fn op(&self, id: NodeId) -> &Op {
        &self.nodes[id.0].op
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.value(id).shape()
    }

    fn dims(&self, id: NodeId) -> (usize, usize) {
        self.value(id).dims2()
    }

    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push_leaf(Op::Input, Value::Owned(value), false)
    }

    pub fn variable(&mut self, value: Tensor) -> NodeId {
        self.push_leaf(Op::Variable, Value::Owned(value), true)
    }

    pub fn param(&mut self, store: &'a ParamStore, id: ParamId) -> NodeId {
        self.push_leaf(Op::Param(id), Value::Borrowed(store.get(id)), true)
    }

    fn push_leaf(&mut self, op: Op, value: Value<'a>, needs_grad: bool) -> NodeId {
        self.nodes.push(Node { op, value, needs_grad });
        NodeId(self.nodes.len() - 1)
    }

    fn push(&mut self, op: Op) -> Result<NodeId> {
        let id = self.nodes.len();
        let value = self.compute(&op, id)?;
        let needs_grad = op.inputs().iter().any(|i| self.nodes[i.0].needs_grad);
        self.nodes.push(Node { op, value: Value::Owned(value), needs_grad });
        Ok(NodeId(id))
    }

    /// Replaces the values of the given leaves. The graph must be
    /// re-[`evaluate`](Graph::evaluate)d before its outputs are read again.
    pub fn bind(&mut self, id: NodeId, value: Tensor) -> Result<()> {
        let node = &mut self.nodes[id.0];
        match node.op {
            Op::Input | Op::Variable => {
                if node.value.tensor().shape() != value.shape() {
                    return Err(Error::Shape {
                        op: "bind",
                        shapes: vec![node.value.tensor().shape().to_vec(), value.shape().to_vec()],
                    });
                }
                node.value = Value::Owned(value);
                self.stale = true;
                Ok(())
            }
            _ => Err(Error::Graph(format!("node {} is not a rebindable leaf", id.0))),
        }
    }

    /// Binds the given leaves and recomputes every non-leaf node in order.
    pub fn evaluate(&mut self, bindings: Vec<(NodeId, Tensor)>) -> Result<()> {
        for (id, t) in bindings {
            self.bind(id, t)?;
        }
        for i in 0..self.nodes.len() {
            if self.nodes[i].op.inputs().is_empty() {
                continue;
            }
            let op = self.nodes[i].op.clone();
            let value = self.compute(&op, i)?;
            self.nodes[i].value = Value::Owned(value);
        }
        self.stale = false;
        Ok(())
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::Transpose(a))
    }

    /// Elementwise sum with broadcasting of unit rows/columns.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::Add(a, b))
    }

    /// Elementwise product with broadcasting of unit rows/columns.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId> {
        self.push(Op::Scale(a, factor))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        self.push(Op::Concat(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        self.push(Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId> {
        self.push(Op::SliceCols(a, start, end))
    }

    pub fn slice_rows(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId> {
        self.push(Op::SliceRows(a, start, end))
    }

    pub fn reshape(&mut self, a: NodeId, rows: usize, cols: usize) -> Result<NodeId> {
        self.push(Op::Reshape(a, rows, cols))
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::SoftmaxRows(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::Tanh(a))
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::Relu(a))
    }

    /// ELU with alpha = 1.
    pub fn elu(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::Elu(a))
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: f64) -> Result<NodeId> {
        self.push(Op::LeakyRelu(a, slope))
    }

    /// Selects rows of `table`; the output has one row per id.
    pub fn gather(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId> {
        self.push(Op::Gather { table, ids: ids.to_vec() })
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::Sum(a))
    }

    pub fn mean(&mut self, a: NodeId) -> Result<NodeId> {
        self.push(Op::Mean(a))
    }

    /// Replaces entries whose mask bit is set with `value`.
    pub fn masked_fill(&mut self, a: NodeId, mask: &[bool], value: f64) -> Result<NodeId> {
        self.push(Op::MaskedFill { input: a, mask: mask.to_vec(), value })
    }

    pub fn cross_entropy(&mut self, logits: NodeId, targets: &[usize]) -> Result<NodeId> {
        self.push(Op::CrossEntropy { logits, targets: targets.to_vec() })
    }

    fn shape_err(&self, op: &'static str, ids: &[NodeId]) -> Error {
        Error::Shape { op, shapes: ids.iter().map(|i| self.shape(*i).to_vec()).collect() }
    }

    fn compute(&self, op: &Op, id: usize) -> Result<Tensor> {
        let out = self.forward(op)?;
        if !out.is_finite() {
            return Err(Error::Overflow { node: id, op: op.name() });
        }
        Ok(out)
    }

    fn forward(&self, op: &Op) -> Result<Tensor> {
        let t = |i: &NodeId| self.value(*i);
        let out = match op {
            Op::Input | Op::Variable | Op::Param(_) => unreachable!("leaves are never recomputed"),
            Op::MatMul(a, b) => {
                let (m, k) = self.dims(*a);
                let (k2, n) = self.dims(*b);
                if k != k2 {
                    return Err(self.shape_err("matmul", &[*a, *b]));
                }
                let mut out = vec![0.0; m * n];
                super::tensor::gemm(m, k, n, t(a).data(), false, t(b).data(), false, &mut out, 0.0);
                Tensor::from_parts(vec![m, n], out)
            }
            Op::Transpose(a) => t(a).transpose(),
            Op::Add(a, b) | Op::Mul(a, b) => {
                let (r, c) = broadcast_shape(self.dims(*a), self.dims(*b))
                    .ok_or_else(|| self.shape_err(op.name(), &[*a, *b]))?;
                let is_add = matches!(op, Op::Add(..));
                let (x, y) = (t(a), t(b));
                let (xa, ya) = (Bcast::new(x.dims2()), Bcast::new(y.dims2()));
                let mut out = Vec::with_capacity(r * c);
                if x.dims2() == y.dims2() {
                    if is_add {
                        out.extend(x.data().iter().zip(y.data()).map(|(p, q)| p + q));
                    } else {
                        out.extend(x.data().iter().zip(y.data()).map(|(p, q)| p * q));
                    }
                } else {
                    for i in 0..r {
                        for j in 0..c {
                            let p = x.data()[xa.at(i, j)];
                            let q = y.data()[ya.at(i, j)];
                            out.push(if is_add { p + q } else { p * q });
                        }
                    }
                }
                Tensor::from_parts(vec![r, c], out)
            }
            Op::Scale(a, s) => {
                let x = t(a);
                Tensor::from_parts(vec_shape(x), x.data().iter().map(|v| v * s).collect())
            }
            Op::Concat(parts) => {
                if parts.is_empty() {
                    return Err(Error::Graph("concat of zero tensors".into()));
                }
                let rows = self.dims(parts[0]).0;
                if parts.iter().any(|p| self.dims(*p).0 != rows) {
                    return Err(self.shape_err("concat", parts));
                }
                let cols: usize = parts.iter().map(|p| self.dims(*p).1).sum();
                let mut out = Vec::with_capacity(rows * cols);
                for r in 0..rows {
                    for p in parts {
                        out.extend_from_slice(t(p).row_slice(r));
                    }
                }
                Tensor::from_parts(vec![rows, cols], out)
            }
            Op::ConcatRows(parts) => {
                if parts.is_empty() {
                    return Err(Error::Graph("concat_rows of zero tensors".into()));
                }
                let cols = self.dims(parts[0]).1;
                if parts.iter().any(|p| self.dims(*p).1 != cols) {
                    return Err(self.shape_err("concat_rows", parts));
                }
                let rows: usize = parts.iter().map(|p| self.dims(*p).0).sum();
                let mut out = Vec::with_capacity(rows * cols);
                for p in parts {
                    out.extend_from_slice(t(p).data());
                }
                Tensor::from_parts(vec![rows, cols], out)
            }
            Op::SliceCols(a, s, e) => {
                let (r, c) = self.dims(*a);
                if s > e || *e > c {
                    return Err(self.shape_err("slice_cols", &[*a]));
                }
                let mut out = Vec::with_capacity(r * (e - s));
                for i in 0..r {
                    out.extend_from_slice(&t(a).row_slice(i)[*s..*e]);
                }
                Tensor::from_parts(vec![r, e - s], out)
            }
            Op::SliceRows(a, s, e) => {
                let (r, c) = self.dims(*a);
                if s > e || *e > r {
                    return Err(self.shape_err("slice_rows", &[*a]));
                }
                Tensor::from_parts(vec![e - s, c], t(a).data()[s * c..e * c].to_vec())
            }
            Op::Reshape(a, r, c) => {
                if t(a).numel() != r * c {
                    return Err(self.shape_err("reshape", &[*a]));
                }
                Tensor::from_parts(vec![*r, *c], t(a).data().to_vec())
            }
            Op::SoftmaxRows(a) => {
                let x = t(a);
                let (r, c) = x.dims2();
                let mut out = vec![0.0; r * c];
                for i in 0..r {
                    softmax_into(x.row_slice(i), &mut out[i * c..(i + 1) * c]);
                }
                Tensor::from_parts(vec![r, c], out)
            }
            Op::Sigmoid(a) => map(t(a), sigmoid),
            Op::Tanh(a) => map(t(a), f64::tanh),
            Op::Relu(a) => map(t(a), |x| if x > 0.0 { x } else { 0.0 }),
            Op::Elu(a) => map(t(a), |x| if x > 0.0 { x } else { x.exp_m1() }),
            Op::LeakyRelu(a, s) => map(t(a), |x| if x > 0.0 { x } else { s * x }),
            Op::Gather { table, ids } => {
                let (rows, cols) = self.dims(*table);
                let mut out = Vec::with_capacity(ids.len() * cols);
                for &id in ids {
                    if id >= rows {
                        return Err(Error::Graph(format!(
                            "gather index {id} out of range for table with {rows} rows"
                        )));
                    }
                    out.extend_from_slice(t(table).row_slice(id));
                }
                Tensor::from_parts(vec![ids.len(), cols], out)
            }
            Op::Sum(a) => Tensor::scalar(t(a).data().iter().sum()),
            Op::Mean(a) => {
                let x = t(a);
                if x.numel() == 0 {
                    return Err(self.shape_err("mean", &[*a]));
                }
                Tensor::scalar(x.data().iter().sum::<f64>() / x.numel() as f64)
            }
            Op::MaskedFill { input, mask, value } => {
                let x = t(input);
                if mask.len() != x.numel() {
                    return Err(Error::Shape {
                        op: "masked_fill",
                        shapes: vec![x.shape().to_vec(), vec![mask.len()]],
                    });
                }
                let data = x
                    .data()
                    .iter()
                    .zip(mask)
                    .map(|(v, m)| if *m { *value } else { *v })
                    .collect();
                Tensor::from_parts(vec_shape(x), data)
            }
            Op::CrossEntropy { logits, targets } => {
                let z = t(logits);
                let (r, c) = z.dims2();
                if targets.len() != r || r == 0 || targets.iter().any(|&y| y >= c) {
                    return Err(Error::Shape {
                        op: "cross_entropy",
                        shapes: vec![z.shape().to_vec(), vec![targets.len()]],
                    });
                }
                let mut total = 0.0;
                for (i, &y) in targets.iter().enumerate() {
                    let row = z.row_slice(i);
                    total += log_sum_exp(row) - row[y];
                }
                Tensor::scalar(total / r as f64)
            }
        };
        Ok(out)
    }

    /// Back-propagates from a scalar `loss`.
    ///
    /// Parameter gradients are added into `param_grads`; the returned
    /// [`Gradients`] hold the gradient of every other differentiable node.
    pub fn backward(&self, loss: NodeId, param_grads: &mut GradStore) -> Result<Gradients> {
        self.backward_scaled(loss, 1.0, param_grads)
    }

    /// As [`backward`](Graph::backward) with the loss multiplied by `seed`.
    pub fn backward_scaled(
        &self,
        loss: NodeId,
        seed: f64,
        param_grads: &mut GradStore,
    ) -> Result<Gradients> {
        if self.stale {
            return Err(Error::NotEvaluated);
        }
        if self.value(loss).numel() != 1 {
            return Err(Error::NonScalarLoss(self.shape(loss).to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        if !self.nodes[loss.0].needs_grad {
            return Ok(Gradients { grads });
        }
        grads[loss.0] = Some(vec![seed]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Param(pid) => {
                    let dst = param_grads.get_mut(*pid);
                    dst.iter_mut().zip(&g).for_each(|(d, x)| *d += x);
                }
                Op::Input => {}
                _ => self.propagate(i, &g, &mut grads, param_grads),
            }
            grads[i] = Some(g);
        }
        // Parameter gradients live in the store only.
        for (i, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, Op::Param(_)) {
                grads[i] = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn propagate(
        &self,
        i: usize,
        g: &[f64],
        grads: &mut [Option<Vec<f64>>],
        store: &mut GradStore,
    ) {
        let node = &self.nodes[i];
        let out = node.value.tensor();
        let (r, c) = out.dims2();
        match &node.op {
            Op::Input | Op::Variable | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.dims(*a);
                let n = c;
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                if let Some(da) = self.target(*a, grads, store) {
                    super::tensor::gemm(m, n, k, g, false, bv, true, da, 1.0);
                }
                if let Some(db) = self.target(*b, grads, store) {
                    super::tensor::gemm(k, m, n, av, true, g, false, db, 1.0);
                }
            }
            Op::Transpose(a) => {
                if let Some(da) = self.target(*a, grads, store) {
                    // out is (r, c) = transpose of (c, r)
                    for p in 0..r {
                        for q in 0..c {
                            da[q * r + p] += g[p * c + q];
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for x in [*a, *b] {
                    let bc = Bcast::new(self.dims(x));
                    if let Some(dx) = self.target(x, grads, store) {
                        if bc.dims == (r, c) {
                            dx.iter_mut().zip(g).for_each(|(d, v)| *d += v);
                        } else {
                            for p in 0..r {
                                for q in 0..c {
                                    dx[bc.at(p, q)] += g[p * c + q];
                                }
                            }
                        }
                    }
                }
            }
            Op::Mul(a, b) => {
                for (x, y) in [(*a, *b), (*b, *a)] {
                    let bx = Bcast::new(self.dims(x));
                    let by = Bcast::new(self.dims(y));
                    let yv = self.value(y).data();
                    if let Some(dx) = self.target(x, grads, store) {
                        if bx.dims == (r, c) && by.dims == (r, c) {
                            for ((d, gv), w) in dx.iter_mut().zip(g).zip(yv) {
                                *d += gv * w;
                            }
                        } else {
                            for p in 0..r {
                                for q in 0..c {
                                    dx[bx.at(p, q)] += g[p * c + q] * yv[by.at(p, q)];
                                }
                            }
                        }
                    }
                }
            }
            Op::Scale(a, s) => {
                if let Some(da) = self.target(*a, grads, store) {
                    da.iter_mut().zip(g).for_each(|(d, v)| *d += s * v);
                }
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let (pr, pc) = self.dims(*p);
                    if let Some(dp) = self.target(*p, grads, store) {
                        for row in 0..pr {
                            let src = &g[row * c + offset..row * c + offset + pc];
                            dp[row * pc..(row + 1) * pc]
                                .iter_mut()
                                .zip(src)
                                .for_each(|(d, v)| *d += v);
                        }
                    }
                    offset += pc;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let len = self.value(*p).numel();
                    if let Some(dp) = self.target(*p, grads, store) {
                        dp.iter_mut().zip(&g[offset..offset + len]).for_each(|(d, v)| *d += v);
                    }
                    offset += len;
                }
            }
            Op::SliceCols(a, s, _) => {
                let ac = self.dims(*a).1;
                if let Some(da) = self.target(*a, grads, store) {
                    for row in 0..r {
                        da[row * ac + s..row * ac + s + c]
                            .iter_mut()
                            .zip(&g[row * c..(row + 1) * c])
                            .for_each(|(d, v)| *d += v);
                    }
                }
            }
            Op::SliceRows(a, s, _) => {
                if let Some(da) = self.target(*a, grads, store) {
                    da[s * c..s * c + r * c].iter_mut().zip(g).for_each(|(d, v)| *d += v);
                }
            }
            Op::Reshape(a, ..) => {
                if let Some(da) = self.target(*a, grads, store) {
                    da.iter_mut().zip(g).for_each(|(d, v)| *d += v);
                }
            }
            Op::SoftmaxRows(a) => {
                let y = out.data();
                if let Some(da) = self.target(*a, grads, store) {
                    for row in 0..r {
                        let ys = &y[row * c..(row + 1) * c];
                        let gs = &g[row * c..(row + 1) * c];
                        let dot: f64 = ys.iter().zip(gs).map(|(p, q)| p * q).sum();
                        for q in 0..c {
                            da[row * c + q] += ys[q] * (gs[q] - dot);
                        }
                    }
                }
            }
            Op::Sigmoid(a) => {
                self.unary(*a, out.data(), g, grads, store, |_, y| y * (1.0 - y));
            }
            Op::Tanh(a) => {
                self.unary(*a, out.data(), g, grads, store, |_, y| 1.0 - y * y);
            }
            Op::Relu(a) => {
                self.unary(*a, out.data(), g, grads, store, |x, _| if x > 0.0 { 1.0 } else { 0.0 });
            }
            Op::Elu(a) => {
                self.unary(*a, out.data(), g, grads, store, |x, y| if x > 0.0 { 1.0 } else { y + 1.0 });
            }
            Op::LeakyRelu(a, s) => {
                let s = *s;
                self.unary(*a, out.data(), g, grads, store, move |x, _| if x > 0.0 { 1.0 } else { s });
            }
            Op::Gather { table, ids } => {
                if let Some(dt) = self.target(*table, grads, store) {
                    for (row, &id) in ids.iter().enumerate() {
                        dt[id * c..(id + 1) * c]
                            .iter_mut()
                            .zip(&g[row * c..(row + 1) * c])
                            .for_each(|(d, v)| *d += v);
                    }
                }
            }
            Op::Sum(a) => {
                if let Some(da) = self.target(*a, grads, store) {
                    da.iter_mut().for_each(|d| *d += g[0]);
                }
            }
            Op::Mean(a) => {
                let n = self.value(*a).numel() as f64;
                if let Some(da) = self.target(*a, grads, store) {
                    da.iter_mut().for_each(|d| *d += g[0] / n);
                }
            }
            Op::MaskedFill { input, mask, .. } => {
                if let Some(da) = self.target(*input, grads, store) {
                    for ((d, v), m) in da.iter_mut().zip(g).zip(mask) {
                        if !m {
                            *d += v;
                        }
                    }
                }
            }
            Op::CrossEntropy { logits, targets } => {
                let z = self.value(*logits);
                let (zr, zc) = z.dims2();
                let scale = g[0] / zr as f64;
                if let Some(dz) = self.target(*logits, grads, store) {
                    let mut probs = vec![0.0; zc];
                    for (row, &y) in targets.iter().enumerate() {
                        softmax_into(z.row_slice(row), &mut probs);
                        for q in 0..zc {
                            let onehot = if q == y { 1.0 } else { 0.0 };
                            dz[row * zc + q] += scale * (probs[q] - onehot);
                        }
                    }
                }
            }
        }
    }

    /// Elementwise op with derivative `df(x, y)` of output `y` at input `x`.
    fn unary(
        &self,
        a: NodeId,
        y: &[f64],
        g: &[f64],
        grads: &mut [Option<Vec<f64>>],
        store: &mut GradStore,
        df: impl Fn(f64, f64) -> f64,
    ) {
        let x = self.value(a).data();
        if let Some(da) = self.target(a, grads, store) {
            for q in 0..da.len() {
                da[q] += g[q] * df(x[q], y[q]);
            }
        }
    }

    /// Gradient buffer receiving contributions for `id`, if it needs one.
    fn target<'g>(
        &self,
        id: NodeId,
        grads: &'g mut [Option<Vec<f64>>],
        store: &'g mut GradStore,
    ) -> Option<&'g mut [f64]> {
        let node = &self.nodes[id.0];
        if !node.needs_grad {
            return None;
        }
        match node.op {
            Op::Param(pid) => Some(store.get_mut(pid)),
            _ => Some(
                grads[id.0].get_or_insert_with(|| vec![0.0; node.value.tensor().numel()]).as_mut_slice(),
            ),
        }
    }
}

/// Broadcast indexing for a 2-D operand: unit dimensions repeat.
struct Bcast {
    dims: (usize, usize),
}

impl Bcast {
    fn new(dims: (usize, usize)) -> Self {
        Bcast { dims }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        let (r, c) = self.dims;
        let i = if r == 1 { 0 } else { i };
        let j = if c == 1 { 0 } else { j };
        i * c + j
    }
}

fn broadcast_shape(a: (usize, usize), b: (usize, usize)) -> Option<(usize, usize)> {
    let dim = |x: usize, y: usize| match (x, y) {
        _ if x == y => Some(x),
        (1, y) => Some(y),
        (x, 1) => Some(x),
        _ => None,
    };
    Some((dim(a.0, b.0)?, dim(a.1, b.1)?))
}

fn vec_shape(t: &Tensor) -> Vec<usize> {
    let (r, c) = t.dims2();
    vec![r, c]
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::from_parts(vec_shape(t), t.data().iter().map(|&x| f(x)).collect())
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Max-subtracted softmax of `x` written into `out`.
pub(crate) fn softmax_into(x: &[f64], out: &mut [f64]) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, v) in out.iter_mut().zip(x) {
        *o = (v - max).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
}

fn log_sum_exp(x: &[f64]) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: usize, cols: usize, data: &[f64]) -> Tensor {
        Tensor::matrix(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn softmax_of_uniform_row_is_uniform() {
        let mut g = Graph::new();
        let x = g.input(Tensor::row(&[0.0, 0.0, 0.0]));
        let y = g.softmax_rows(x).unwrap();
        for v in g.value(y).data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn activations_at_reference_points() {
        let mut g = Graph::new();
        let x = g.input(Tensor::row(&[0.0, -2.0, 1e-12, -1e-12]));
        let s = g.sigmoid(x).unwrap();
        let r = g.relu(x).unwrap();
        let e = g.elu(x).unwrap();
        assert_eq!(g.value(s).data()[0], 0.5);
        assert_eq!(g.value(r).data()[1], 0.0);
        assert_eq!(g.value(e).data()[0], 0.0);
        assert!(g.value(e).data()[2].abs() <= 2e-12);
        assert!(g.value(e).data()[3].abs() <= 2e-12);
    }

    #[test]
    fn linear_map_gradient_is_transpose() {
        let mut g = Graph::new();
        let w = g.input(t(1, 2, &[1.0, 2.0]));
        let x = g.variable(t(2, 1, &[3.0, 4.0]));
        let y = g.matmul(w, x).unwrap();
        let loss = g.sum(y).unwrap();
        let mut store = GradStore::zeros_like(&ParamStore::new());
        let grads = g.backward(loss, &mut store).unwrap();
        assert_eq!(grads.get(x).unwrap(), &[1.0, 2.0]);
        assert!(grads.get(w).is_none());
    }

    #[test]
    fn sigmoid_gradient_at_zero() {
        let mut g = Graph::new();
        let x = g.variable(Tensor::scalar(0.0));
        let y = g.sigmoid(x).unwrap();
        let grads = g.backward(y, &mut GradStore::zeros_like(&ParamStore::new())).unwrap();
        assert_eq!(grads.get(x).unwrap(), &[0.25]);
    }

    #[test]
    fn shape_mismatch_names_primitive() {
        let mut g = Graph::new();
        let a = g.input(Tensor::zeros(&[2, 3]));
        let b = g.input(Tensor::zeros(&[2, 3]));
        match g.matmul(a, b) {
            Err(Error::Shape { op, shapes }) => {
                assert_eq!(op, "matmul");
                assert_eq!(shapes, vec![vec![2, 3], vec![2, 3]]);
            }
            other => panic!("unexpected {:?}", other.map(|_| ())),
        }
        let c = g.input(Tensor::zeros(&[3, 2]));
        assert!(matches!(g.add(a, c), Err(Error::Shape { op: "add", .. })));
    }

    #[test]
    fn overflow_is_an_error() {
        let mut g = Graph::new();
        let x = g.input(Tensor::scalar(1e300));
        let y = g.scale(x, 1e300);
        assert!(matches!(y, Err(Error::Overflow { node: 1, op: "scale" })));
    }

    #[test]
    fn loss_must_be_scalar_and_evaluated() {
        let mut g = Graph::new();
        let x = g.variable(Tensor::row(&[1.0, 2.0]));
        let y = g.tanh(x).unwrap();
        let mut gs = GradStore::zeros_like(&ParamStore::new());
        assert!(matches!(g.backward(y, &mut gs), Err(Error::NonScalarLoss(_))));
        let s = g.sum(y).unwrap();
        g.bind(x, Tensor::row(&[0.0, 0.0])).unwrap();
        assert!(matches!(g.backward(s, &mut gs), Err(Error::NotEvaluated)));
        g.evaluate(vec![]).unwrap();
        assert!(g.backward(s, &mut gs).is_ok());
    }

    #[test]
    fn replay_is_bitwise_identical() {
        let mut g = Graph::new();
        let x = g.input(t(2, 2, &[0.3, -1.2, 2.5, 0.1]));
        let h = g.tanh(x).unwrap();
        let s = g.softmax_rows(h).unwrap();
        let m = g.matmul(s, x).unwrap();
        let before = g.value(m).clone();
        g.evaluate(vec![(x, t(2, 2, &[9.0, 9.0, 9.0, 9.0]))]).unwrap();
        assert_ne!(g.value(m), &before);
        g.evaluate(vec![(x, t(2, 2, &[0.3, -1.2, 2.5, 0.1]))]).unwrap();
        assert_eq!(g.value(m), &before);
    }

    #[test]
    fn parameter_gradients_accumulate_until_zeroed() {
        let mut store = ParamStore::new();
        let p = store.add("w", Tensor::row(&[1.0, -1.0])).unwrap();
        let mut gs = GradStore::zeros_like(&store);
        let mut g = Graph::new();
        let w = g.param(&store, p);
        let y = g.mul(w, w).unwrap();
        let loss = g.sum(y).unwrap();
        g.backward(loss, &mut gs).unwrap();
        assert_eq!(gs.get(p), &[2.0, -2.0]);
        g.backward(loss, &mut gs).unwrap();
        assert_eq!(gs.get(p), &[4.0, -4.0]);
        gs.zero();
        g.backward(loss, &mut gs).unwrap();
        assert_eq!(gs.get(p), &[2.0, -2.0]);
    }

    #[test]
    fn cross_entropy_of_uniform_logits_is_log_classes() {
        let mut g = Graph::new();
        let z = g.input(Tensor::zeros(&[3, 5]));
        let l = g.cross_entropy(z, &[0, 4, 2]).unwrap();
        assert!((g.value(l).data()[0] - 5f64.ln()).abs() < 1e-15);
        let z = g.input(t(1, 3, &[800.0, 0.0, 0.0]));
        let l = g.cross_entropy(z, &[0]).unwrap();
        assert!(g.value(l).data()[0] < 1e-300);
    }

    #[test]
    fn masked_fill_and_gather() {
        let mut g = Graph::new();
        let table = g.variable(t(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let rows = g.gather(table, &[2, 0, 2]).unwrap();
        assert_eq!(g.value(rows).data(), &[5.0, 6.0, 1.0, 2.0, 5.0, 6.0]);
        let f = g.masked_fill(rows, &[true, false, false, false, false, true], -7.0).unwrap();
        assert_eq!(g.value(f).data(), &[-7.0, 6.0, 1.0, 2.0, 5.0, -7.0]);
        let loss = g.sum(f).unwrap();
        let grads = g.backward(loss, &mut GradStore::zeros_like(&ParamStore::new())).unwrap();
        assert_eq!(grads.get(table).unwrap(), &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        assert!(g.gather(table, &[3]).is_err());
    }

    /// Central differences on every entry of every variable, via replay.
    fn check_primitive(build: impl Fn(&mut Graph<'static>, &[NodeId]) -> NodeId, inputs: &[Tensor]) {
        let mut g = Graph::new();
        let vars: Vec<NodeId> = inputs.iter().map(|x| g.variable(x.clone())).collect();
        let out = build(&mut g, &vars);
        // Weighted sum so that every output entry matters differently.
        let n = g.value(out).numel();
        let (r, c) = g.value(out).dims2();
        let weights = g.input(
            Tensor::matrix(r, c, (0..n).map(|i| ((i as f64) * 0.37).sin() + 0.5).collect()).unwrap(),
        );
        let weighted = g.mul(out, weights).unwrap();
        let loss = g.sum(weighted).unwrap();
        let grads = g.backward(loss, &mut GradStore::zeros_like(&ParamStore::new())).unwrap();
        let analytic: Vec<Vec<f64>> =
            vars.iter().map(|v| grads.get(*v).map(<[f64]>::to_vec).unwrap()).collect();
        let eps = 1e-6;
        for (k, v) in vars.iter().enumerate() {
            for (i, &a) in analytic[k].iter().enumerate() {
                let mut plus = inputs[k].clone();
                plus.data_mut()[i] += eps;
                g.evaluate(vec![(*v, plus)]).unwrap();
                let lp = g.value(loss).data()[0];
                let mut minus = inputs[k].clone();
                minus.data_mut()[i] -= eps;
                g.evaluate(vec![(*v, minus)]).unwrap();
                let lm = g.value(loss).data()[0];
                g.evaluate(vec![(*v, inputs[k].clone())]).unwrap();
                let numeric = (lp - lm) / (2.0 * eps);
                let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
                assert!(err < 1e-6, "input {k} entry {i}: analytic {a} numeric {numeric}");
            }
        }
    }

    fn sample(rows: usize, cols: usize, seed: f64) -> Tensor {
        let data = (0..rows * cols).map(|i| ((i as f64 + seed) * 1.7).sin() * 1.3 + 0.05).collect();
        Tensor::matrix(rows, cols, data).unwrap()
    }

    #[test]
    fn primitives_match_central_differences() {
        let a = sample(3, 4, 0.0);
        let b = sample(4, 2, 1.0);
        let same = sample(3, 4, 2.0);
        let row = sample(1, 4, 3.0);
        let col = sample(3, 1, 4.0);
        check_primitive(|g, v| g.matmul(v[0], v[1]).unwrap(), &[a.clone(), b.clone()]);
        check_primitive(|g, v| g.transpose(v[0]).unwrap(), std::slice::from_ref(&a));
        check_primitive(|g, v| g.add(v[0], v[1]).unwrap(), &[a.clone(), same.clone()]);
        check_primitive(|g, v| g.add(v[0], v[1]).unwrap(), &[a.clone(), row.clone()]);
        check_primitive(|g, v| g.add(v[1], v[0]).unwrap(), &[a.clone(), col.clone()]);
        check_primitive(|g, v| g.mul(v[0], v[1]).unwrap(), &[a.clone(), same.clone()]);
        check_primitive(|g, v| g.mul(v[0], v[1]).unwrap(), &[a.clone(), col.clone()]);
        check_primitive(|g, v| g.mul(v[1], v[0]).unwrap(), &[a.clone(), row.clone()]);
        check_primitive(|g, v| g.mul(v[0], v[0]).unwrap(), std::slice::from_ref(&a));
        check_primitive(|g, v| g.scale(v[0], -2.5).unwrap(), std::slice::from_ref(&a));
        check_primitive(|g, v| g.concat(&[v[0], v[1], v[0]]).unwrap(), &[a.clone(), col.clone()]);
        check_primitive(|g, v| g.concat_rows(&[v[0], v[1]]).unwrap(), &[a.clone(), row.clone()]);
        check_primitive(|g, v| g.slice_cols(v[0], 1, 3).unwrap(), std::slice::from_ref(&a));
        check_primitive(|g, v| g.slice_rows(v[0], 1, 2).unwrap(), std::slice::from_ref(&a));
        check_primitive(|g, v| g.reshape(v[0], 2, 6).unwrap(), std::slice::from_ref(&a));
        check_primitive(|g, v| g.softmax_rows(v[0]).unwrap(), std::slice::from_ref(&a));
        check_primitive(|g, v| g.sigmoid(v[0]).unwrap(), std::slice::from_ref(&a));
        check_primitive(|g, v| g.tanh(v[0]).unwrap(), std::slice::from_ref(&a));
        check_primitive(|g, v| g.relu(v[0]).unwrap(), std::slice::from_ref(&a));
        check_primitive(|g, v| g.elu(v[0]).unwrap(), std::slice::from_ref(&a));
        check_primitive(|g, v| g.leaky_relu(v[0], 0.2).unwrap(), std::slice::from_ref(&a));
        check_primitive(|g, v| g.gather(v[0], &[1, 1, 0]).unwrap(), std::slice::from_ref(&b));
        check_primitive(|g, v| g.mean(v[0]).unwrap(), std::slice::from_ref(&a));
        check_primitive(
            |g, v| g.masked_fill(v[0], &[true, false, false, true, false, false, true, false], 0.5).unwrap(),
            std::slice::from_ref(&b),
        );
        check_primitive(|g, v| g.cross_entropy(v[0], &[3, 0, 1]).unwrap(), std::slice::from_ref(&a));
    }

    #[test]
    fn softmax_rows_sum_to_one_and_stay_positive() {
        let mut g = Graph::new();
        let x = g.input(t(2, 3, &[700.0, -700.0, 3.0, 1e-3, 2e-3, -5.0]));
        let y = g.softmax_rows(x).unwrap();
        for r in 0..2 {
            let row = g.value(y).row_slice(r);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(g.value(y).row_slice(1).iter().all(|v| *v > 0.0));
    }
}
