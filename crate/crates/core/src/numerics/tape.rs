//! Reverse-mode differentiation over a flat operation record.
//!
//! Every operation appends a node whose inputs are earlier nodes, so the
//! record is already in topological order and [`Tape::backward`] only has to
//! walk it from the end.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::kernels;
use super::tensor::Tensor;
use crate::error::{dim_err, Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Value<'p> {
    Owned(Tensor),
    Borrowed(&'p Tensor),
}

impl Value<'_> {
    fn get(&self) -> &Tensor {
        match self {
            Value::Owned(t) => t,
            Value::Borrowed(t) => t,
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(usize),
    MatVec(Var, Var),
    Row(Var, usize),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Dot(Var, Var),
    Sum(Var),
    SumOf(Vec<Var>),
    Softmax(Var),
    LogSoftmax(Var),
    Pick(Var, usize),
    WeightedSum(Var, Vec<Var>),
}

#[derive(Debug)]
struct Node<'p> {
    value: Value<'p>,
    op: Op,
    needs_grad: bool,
}

/// Operation record for one evaluation. Parameters are borrowed, not copied.
#[derive(Debug, Default)]
pub struct Tape<'p> {
    nodes: Vec<Node<'p>>,
}

impl<'p> Tape<'p> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        self.nodes[v.0].value.get()
    }

    fn push(&mut self, value: Value<'p>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn owned(&mut self, t: Tensor, op: Op, inputs: &[Var]) -> Var {
        let needs = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.push(Value::Owned(t), op, needs)
    }

    /// Registers a trainable tensor under caller-chosen identifier `id`.
    pub fn param(&mut self, id: usize, t: &'p Tensor) -> Var {
        self.push(Value::Borrowed(t), Op::Param(id), true)
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Value::Owned(t), Op::Constant, false)
    }

    pub fn constant_ref(&mut self, t: &'p Tensor) -> Var {
        self.push(Value::Borrowed(t), Op::Constant, false)
    }

    pub fn matvec(&mut self, m: Var, x: Var) -> Result<Var> {
        let out = self.value(m).matvec(self.value(x))?;
        Ok(self.owned(out, Op::MatVec(m, x), &[m, x]))
    }

    /// Row `row` of a matrix as a vector (an embedding lookup).
    pub fn row(&mut self, m: Var, row: usize) -> Result<Var> {
        let t = self.value(m);
        if !t.is_matrix() || row >= t.rows() {
            return Err(Error::TokenOutOfRange {
                id: row,
                vocab: t.rows(),
            });
        }
        let out = Tensor::vector(t.row(row).to_vec());
        Ok(self.owned(out, Op::Row(m, row), &[m]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).add(self.value(b))?;
        Ok(self.owned(out, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).sub(self.value(b))?;
        Ok(self.owned(out, Op::Sub(a, b), &[a, b]))
    }

    /// Hadamard product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).mul(self.value(b))?;
        Ok(self.owned(out, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, alpha: f64) -> Var {
        let out = self.value(a).scale(alpha);
        self.owned(out, Op::Scale(a, alpha), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).tanh();
        self.owned(out, Op::Tanh(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).sigmoid();
        self.owned(out, Op::Sigmoid(a), &[a])
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let out = {
            let ts: Vec<&Tensor> = parts.iter().map(|&v| self.value(v)).collect();
            super::tensor::concat(&ts)?
        };
        Ok(self.owned(out, Op::Concat(parts.to_vec()), parts))
    }

    /// `len` entries of a vector starting at `start`.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(a);
        if !t.is_vector() || len == 0 || start + len > t.len() {
            return Err(dim_err("slice", t.shape(), &[start, len]));
        }
        let out = Tensor::vector(t.data()[start..start + len].to_vec());
        Ok(self.owned(out, Op::Slice(a, start), &[a]))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).dot(self.value(b))?;
        Ok(self.owned(Tensor::scalar(out), Op::Dot(a, b), &[a, b]))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = self.value(a).sum();
        self.owned(Tensor::scalar(out), Op::Sum(a), &[a])
    }

    /// Elementwise sum of equally shaped tensors.
    pub fn sum_of(&mut self, parts: &[Var]) -> Result<Var> {
        let (&first, rest) = parts
            .split_first()
            .ok_or_else(|| Error::Argument("sum of nothing".into()))?;
        let mut acc = self.value(first).clone();
        for &p in rest {
            let t = self.value(p);
            if t.shape() != acc.shape() {
                return Err(dim_err("sum_of", acc.shape(), t.shape()));
            }
            for (a, b) in acc.data_mut().iter_mut().zip(t.data()) {
                *a += b;
            }
        }
        Ok(self.owned(acc, Op::SumOf(parts.to_vec()), parts))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let out = self.value(a).softmax();
        self.owned(out, Op::Softmax(a), &[a])
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let out = self.value(a).log_softmax();
        self.owned(out, Op::LogSoftmax(a), &[a])
    }

    /// Entry `index` of a vector as a scalar.
    pub fn pick(&mut self, a: Var, index: usize) -> Result<Var> {
        let t = self.value(a);
        if index >= t.len() {
            return Err(Error::TokenOutOfRange {
                id: index,
                vocab: t.len(),
            });
        }
        let out = Tensor::scalar(t.data()[index]);
        Ok(self.owned(out, Op::Pick(a, index), &[a]))
    }

    /// `Σ weights[i] · items[i]` for a weight vector and equally shaped items.
    pub fn weighted_sum(&mut self, weights: Var, items: &[Var]) -> Result<Var> {
        let w = self.value(weights);
        if w.len() != items.len() || items.is_empty() {
            return Err(dim_err("weighted_sum", w.shape(), &[items.len()]));
        }
        let shape = self.value(items[0]).shape().to_vec();
        let mut out = Tensor::zeros(&shape);
        for (i, &it) in items.iter().enumerate() {
            let t = self.value(it);
            if t.shape() != shape.as_slice() {
                return Err(dim_err("weighted_sum", &shape, t.shape()));
            }
            kernels::axpy(w.data()[i], t.data(), out.data_mut());
        }
        let mut inputs = items.to_vec();
        inputs.push(weights);
        Ok(self.owned(out, Op::WeightedSum(weights, items.to_vec()), &inputs))
    }

    /// Propagates `∂loss/∂node` to every node that depends on a parameter.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(Error::Contract(alloc::format!(
                "backward needs a scalar loss, got shape {:?}",
                lt.shape()
            )));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(&node.op, i, &g, &mut grads);
            grads[i] = Some(g);
        }

        let mut params: BTreeMap<usize, Tensor> = BTreeMap::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Param(id) = node.op {
                let shape = node.value.get().shape();
                let entry = params.entry(id).or_insert_with(|| Tensor::zeros(shape));
                if let Some(g) = &grads[i] {
                    kernels::axpy(1.0, g, entry.data_mut());
                }
            }
        }
        Ok(Gradients { nodes: grads, params })
    }

    fn accumulator<'g>(&self, grads: &'g mut [Option<Vec<f64>>], v: Var) -> &'g mut Vec<f64> {
        let len = self.nodes[v.0].value.get().len();
        grads[v.0].get_or_insert_with(|| vec![0.0; len])
    }

    fn propagate(&self, op: &Op, at: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |v: Var| self.nodes[v.0].value.get();
        let wants = |v: Var| self.nodes[v.0].needs_grad;
        macro_rules! acc {
            ($v:expr) => {
                self.accumulator(grads, $v)
            };
        }
        match *op {
            Op::Constant | Op::Param(_) => {}
            Op::MatVec(m, x) => {
                let mt = val(m);
                let cols = mt.cols();
                if wants(x) {
                    kernels::matvec_t_acc(mt.data(), cols, g, acc!(x));
                }
                if wants(m) {
                    kernels::outer_acc(g, val(x).data(), acc!(m));
                }
            }
            Op::Row(m, row) => {
                let cols = val(m).cols();
                let buf = acc!(m);
                kernels::axpy(1.0, g, &mut buf[row * cols..(row + 1) * cols]);
            }
            Op::Add(a, b) => {
                if wants(a) {
                    kernels::axpy(1.0, g, acc!(a));
                }
                if wants(b) {
                    kernels::axpy(1.0, g, acc!(b));
                }
            }
            Op::Sub(a, b) => {
                if wants(a) {
                    kernels::axpy(1.0, g, acc!(a));
                }
                if wants(b) {
                    kernels::axpy(-1.0, g, acc!(b));
                }
            }
            Op::Mul(a, b) => {
                if wants(a) {
                    let bv = val(b).data();
                    for ((o, gi), bi) in acc!(a).iter_mut().zip(g).zip(bv) {
                        *o += gi * bi;
                    }
                }
                if wants(b) {
                    let av = val(a).data();
                    for ((o, gi), ai) in acc!(b).iter_mut().zip(g).zip(av) {
                        *o += gi * ai;
                    }
                }
            }
            Op::Scale(a, alpha) => kernels::axpy(alpha, g, acc!(a)),
            Op::Tanh(a) => {
                let y = self.nodes[at].value.get().data();
                for ((o, gi), yi) in acc!(a).iter_mut().zip(g).zip(y) {
                    *o += gi * (1.0 - yi * yi);
                }
            }
            Op::Sigmoid(a) => {
                let y = self.nodes[at].value.get().data();
                for ((o, gi), yi) in acc!(a).iter_mut().zip(g).zip(y) {
                    *o += gi * yi * (1.0 - yi);
                }
            }
            Op::Concat(ref parts) => {
                let mut off = 0;
                for &p in parts {
                    let len = val(p).len();
                    if wants(p) {
                        kernels::axpy(1.0, &g[off..off + len], acc!(p));
                    }
                    off += len;
                }
            }
            Op::Slice(a, start) => {
                let buf = acc!(a);
                kernels::axpy(1.0, g, &mut buf[start..start + g.len()]);
            }
            Op::Dot(a, b) => {
                if wants(a) {
                    kernels::axpy(g[0], val(b).data(), acc!(a));
                }
                if wants(b) {
                    kernels::axpy(g[0], val(a).data(), acc!(b));
                }
            }
            Op::Sum(a) => {
                for o in acc!(a).iter_mut() {
                    *o += g[0];
                }
            }
            Op::SumOf(ref parts) => {
                for &p in parts {
                    if wants(p) {
                        kernels::axpy(1.0, g, acc!(p));
                    }
                }
            }
            Op::Softmax(a) => {
                let y = self.nodes[at].value.get().data();
                let gy = kernels::dot(g, y);
                for ((o, gi), yi) in acc!(a).iter_mut().zip(g).zip(y) {
                    *o += yi * (gi - gy);
                }
            }
            Op::LogSoftmax(a) => {
                let y = self.nodes[at].value.get().data();
                let gs: f64 = g.iter().sum();
                for ((o, gi), yi) in acc!(a).iter_mut().zip(g).zip(y) {
                    *o += gi - libm::exp(*yi) * gs;
                }
            }
            Op::Pick(a, index) => acc!(a)[index] += g[0],
            Op::WeightedSum(w, ref items) => {
                let wv = val(w).data();
                if wants(w) {
                    for (k, &it) in items.iter().enumerate() {
                        let d = kernels::dot(g, val(it).data());
                        acc!(w)[k] += d;
                    }
                }
                for (k, &it) in items.iter().enumerate() {
                    if wants(it) {
                        kernels::axpy(wv[k], g, acc!(it));
                    }
                }
            }
        }
    }
}

/// Result of [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    nodes: Vec<Option<Vec<f64>>>,
    params: BTreeMap<usize, Tensor>,
}

impl Gradients {
    /// Gradient with respect to a registered parameter id; zero-filled when
    /// the loss does not depend on it. `None` if the id was never registered.
    pub fn param(&self, id: usize) -> Option<&Tensor> {
        self.params.get(&id)
    }

    pub fn params(&self) -> &BTreeMap<usize, Tensor> {
        &self.params
    }

    pub fn into_params(self) -> BTreeMap<usize, Tensor> {
        self.params
    }

    /// Raw gradient of an arbitrary node, if any reached it.
    pub fn node(&self, v: Var) -> Option<&[f64]> {
        self.nodes.get(v.0).and_then(|g| g.as_deref())
    }
}
