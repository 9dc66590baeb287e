//! Minimal reverse-mode automatic differentiation on tensors.
//!
//! A [`Graph`] records every forward operation together with its computed
//! value. [`Graph::backward`] then walks the recorded nodes in reverse and
//! accumulates gradients of a scalar loss with respect to every node,
//! including the parameter leaves. The operation set is exactly what the
//! actor-critic network and the PPO loss require; this is not a general
//! autodiff library.
//!
//! Conventions:
//! - values are `f64` `ArrayD`; scalars are 0-dimensional arrays,
//! - max-pool gradients route to the argmax element, ties to the lowest index,
//! - node ids are indices into the construction order, so reverse iteration
//!   is a valid topological order.

use crate::error::{Error, Result};
use crate::special::{digamma, ln_gamma, trigamma};
use ndarray::prelude::*;
use ndarray::concatenate;

pub type NodeId = usize;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    /// `[m, n] + [n]`, bias broadcast over rows.
    AddBias(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    /// `a - s`, `s` a 0-d scalar broadcast over `a`.
    SubScalar(NodeId, NodeId),
    Neg(NodeId),
    Scale(NodeId, f64),
    AddConst(NodeId, f64),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Softplus(NodeId),
    Exp(NodeId),
    Ln(NodeId),
    Square(NodeId),
    LnGamma(NodeId),
    Digamma(NodeId),
    /// Elementwise minimum; gradient routes to the first input on ties.
    MinElem(NodeId, NodeId),
    /// Clamp to `[lo, hi]`; gradient passes only strictly inside.
    ClampConst(NodeId, f64, f64),
    /// Max over `axis` with keepdim; flat argmax indices recorded.
    MaxAxis {
        input: NodeId,
        axis: usize,
        argmax: Vec<usize>,
    },
    /// Broadcast a size-1 axis to `count`.
    Repeat {
        input: NodeId,
        axis: usize,
        count: usize,
    },
    Concat(Vec<NodeId>, usize),
    Reshape(NodeId),
    /// Column `j` of a `[m, n]` matrix as a `[m]` vector.
    Col(NodeId, usize),
    /// Element `i` of a `[k]` vector as a 0-d scalar.
    SelectIdx(NodeId, usize),
    SumAll(NodeId),
    MeanAll(NodeId),
    /// log-sum-exp of a `[k]` vector as a 0-d scalar.
    LogSumExp(NodeId),
}

struct Node {
    value: ArrayD<f64>,
    op: Op,
}

/// Recorded forward computation supporting reverse-mode gradients.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

pub fn stable_softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn stable_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &ArrayD<f64> {
        &self.nodes[id].value
    }

    /// Value of a 0-d node as f64.
    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = &self.nodes[id].value;
        debug_assert_eq!(v.ndim(), 0);
        v.iter().next().copied().unwrap()
    }

    fn push(&mut self, value: ArrayD<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        self.nodes.len() - 1
    }

    pub fn leaf(&mut self, value: ArrayD<f64>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn leaf2(&mut self, value: Array2<f64>) -> NodeId {
        self.leaf(value.into_dyn())
    }

    pub fn leaf_scalar(&mut self, value: f64) -> NodeId {
        self.leaf(arr0(value).into_dyn())
    }

    fn as2(&self, id: NodeId) -> ArrayView2<'_, f64> {
        self.nodes[id]
            .value
            .view()
            .into_dimensionality::<Ix2>()
            .expect("node is not 2-d")
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.as2(a).dot(&self.as2(b)).into_dyn();
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add_bias(&mut self, x: NodeId, bias: NodeId) -> NodeId {
        let b = self.nodes[bias]
            .value
            .view()
            .into_dimensionality::<Ix1>()
            .expect("bias is not 1-d");
        let v = (&self.as2(x) + &b).into_dyn();
        self.push(v, Op::AddBias(x, bias))
    }

    fn binary(&mut self, a: NodeId, b: NodeId, f: impl Fn(f64, f64) -> f64, op: Op) -> NodeId {
        assert_eq!(
            self.nodes[a].value.shape(),
            self.nodes[b].value.shape(),
            "elementwise op on mismatched shapes"
        );
        let mut v = self.nodes[a].value.clone();
        v.zip_mut_with(&self.nodes[b].value, |x, &y| *x = f(*x, y));
        self.push(v, op)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(a, b, |x, y| x / y, Op::Div(a, b))
    }

    pub fn min_elem(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(a, b, |x, y| if x <= y { x } else { y }, Op::MinElem(a, b))
    }

    pub fn sub_scalar(&mut self, a: NodeId, s: NodeId) -> NodeId {
        let sv = self.scalar(s);
        let v = self.nodes[a].value.mapv(|x| x - sv);
        self.push(v, Op::SubScalar(a, s))
    }

    fn unary(&mut self, a: NodeId, f: impl Fn(f64) -> f64, op: Op) -> NodeId {
        let v = self.nodes[a].value.mapv(f);
        self.push(v, op)
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        self.unary(a, |x| -x, Op::Neg(a))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        self.unary(a, |x| x * c, Op::Scale(a, c))
    }

    pub fn add_const(&mut self, a: NodeId, c: f64) -> NodeId {
        self.unary(a, |x| x + c, Op::AddConst(a, c))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.unary(a, stable_sigmoid, Op::Sigmoid(a))
    }

    pub fn softplus(&mut self, a: NodeId) -> NodeId {
        self.unary(a, stable_softplus, Op::Softplus(a))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.unary(a, f64::exp, Op::Exp(a))
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        self.unary(a, f64::ln, Op::Ln(a))
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        self.unary(a, |x| x * x, Op::Square(a))
    }

    pub fn ln_gamma(&mut self, a: NodeId) -> NodeId {
        self.unary(a, ln_gamma, Op::LnGamma(a))
    }

    pub fn digamma_node(&mut self, a: NodeId) -> NodeId {
        self.unary(a, digamma, Op::Digamma(a))
    }

    pub fn clamp_const(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        self.unary(a, |x| x.clamp(lo, hi), Op::ClampConst(a, lo, hi))
    }

    /// Max over `axis` with keepdim semantics; ties resolve to the lowest index.
    pub fn max_axis(&mut self, a: NodeId, axis: usize) -> NodeId {
        let input = &self.nodes[a].value;
        let n = input.shape()[axis];
        assert!(n > 0, "max over empty axis");
        let mut out_shape: Vec<usize> = input.shape().to_vec();
        out_shape[axis] = 1;
        let mut out = ArrayD::zeros(IxDyn(&out_shape));
        let mut argmax = Vec::with_capacity(out.len());
        // lanes iterate in row-major order of the remaining axes, matching
        // the output's own row-major order
        for (lane, slot) in input
            .lanes(Axis(axis))
            .into_iter()
            .zip(out.iter_mut())
        {
            let mut best = 0usize;
            let mut best_v = lane[0];
            for (i, &v) in lane.iter().enumerate().skip(1) {
                if v > best_v {
                    best_v = v;
                    best = i;
                }
            }
            *slot = best_v;
            argmax.push(best);
        }
        self.push(out, Op::MaxAxis { input: a, axis, argmax })
    }

    /// Broadcast a size-1 axis to `count` copies.
    pub fn repeat(&mut self, a: NodeId, axis: usize, count: usize) -> NodeId {
        let input = &self.nodes[a].value;
        assert_eq!(input.shape()[axis], 1, "repeat needs a size-1 axis");
        let mut out_shape: Vec<usize> = input.shape().to_vec();
        out_shape[axis] = count;
        let out = input
            .broadcast(IxDyn(&out_shape))
            .expect("broadcast failed")
            .to_owned();
        self.push(out, Op::Repeat { input: a, axis, count })
    }

    pub fn concat(&mut self, parts: &[NodeId], axis: usize) -> NodeId {
        let views: Vec<_> = parts.iter().map(|&p| self.nodes[p].value.view()).collect();
        let out = concatenate(Axis(axis), &views).expect("concat shape mismatch");
        self.push(out, Op::Concat(parts.to_vec(), axis))
    }

    pub fn reshape(&mut self, a: NodeId, shape: &[usize]) -> NodeId {
        // concat outputs are not always standard layout; reshape is defined
        // on the logical row-major order
        let out = self.nodes[a]
            .value
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order(IxDyn(shape))
            .expect("reshape element count mismatch");
        self.push(out, Op::Reshape(a))
    }

    pub fn col(&mut self, a: NodeId, j: usize) -> NodeId {
        let v = self.as2(a).column(j).to_owned().into_dyn();
        self.push(v, Op::Col(a, j))
    }

    pub fn select_idx(&mut self, a: NodeId, i: usize) -> NodeId {
        let v = self.nodes[a]
            .value
            .view()
            .into_dimensionality::<Ix1>()
            .expect("select_idx on non-1d node");
        let out = arr0(v[i]).into_dyn();
        self.push(out, Op::SelectIdx(a, i))
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let v = arr0(self.nodes[a].value.sum()).into_dyn();
        self.push(v, Op::SumAll(a))
    }

    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let n = self.nodes[a].value.len() as f64;
        let v = arr0(self.nodes[a].value.sum() / n).into_dyn();
        self.push(v, Op::MeanAll(a))
    }

    pub fn log_sum_exp(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a]
            .value
            .view()
            .into_dimensionality::<Ix1>()
            .expect("log_sum_exp on non-1d node");
        let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = v.iter().map(|&z| (z - m).exp()).sum();
        let out = arr0(m + s.ln()).into_dyn();
        self.push(out, Op::LogSumExp(a))
    }

    /// Gradients of the 0-d `loss` node with respect to every node.
    ///
    /// Nodes not on a path to the loss get zero gradients. Errors if `loss`
    /// does not refer to a scalar node of this graph.
    pub fn backward(&self, loss: NodeId) -> Result<Vec<ArrayD<f64>>> {
        if loss >= self.nodes.len() {
            return Err(Error::contract(format!(
                "backward: node {loss} not on this tape (len {})",
                self.nodes.len()
            )));
        }
        if self.nodes[loss].value.ndim() != 0 {
            return Err(Error::contract("backward: loss node is not scalar"));
        }
        let mut grads: Vec<ArrayD<f64>> = self
            .nodes
            .iter()
            .map(|n| ArrayD::zeros(n.value.raw_dim()))
            .collect();
        grads[loss] = arr0(1.0).into_dyn();

        for id in (0..=loss).rev() {
            if grads[id].iter().all(|&g| g == 0.0) {
                continue;
            }
            let g = grads[id].clone();
            match &self.nodes[id].op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let g2 = g.view().into_dimensionality::<Ix2>().unwrap();
                    let da = g2.dot(&self.as2(*b).t());
                    let db = self.as2(*a).t().dot(&g2);
                    grads[*a] += &da.into_dyn();
                    grads[*b] += &db.into_dyn();
                }
                Op::AddBias(x, bias) => {
                    grads[*x] += &g;
                    let g2 = g.view().into_dimensionality::<Ix2>().unwrap();
                    let db = g2.sum_axis(Axis(0));
                    grads[*bias] += &db.into_dyn();
                }
                Op::Add(a, b) => {
                    grads[*a] += &g;
                    grads[*b] += &g;
                }
                Op::Sub(a, b) => {
                    grads[*a] += &g;
                    grads[*b] -= &g;
                }
                Op::Mul(a, b) => {
                    let da = &g * &self.nodes[*b].value;
                    let db = &g * &self.nodes[*a].value;
                    grads[*a] += &da;
                    grads[*b] += &db;
                }
                Op::Div(a, b) => {
                    let bv = &self.nodes[*b].value;
                    let da = &g / bv;
                    let db = -(&g * &self.nodes[*a].value) / (bv * bv);
                    grads[*a] += &da;
                    grads[*b] += &db;
                }
                Op::SubScalar(a, s) => {
                    grads[*a] += &g;
                    let total: f64 = g.sum();
                    grads[*s] -= &arr0(total).into_dyn();
                }
                Op::Neg(a) => grads[*a] -= &g,
                Op::Scale(a, c) => {
                    let da = &g * *c;
                    grads[*a] += &da;
                }
                Op::AddConst(a, _) => grads[*a] += &g,
                Op::Tanh(a) => {
                    let y = &self.nodes[id].value;
                    let da = &g * &y.mapv(|t| 1.0 - t * t);
                    grads[*a] += &da;
                }
                Op::Sigmoid(a) => {
                    let y = &self.nodes[id].value;
                    let da = &g * &y.mapv(|s| s * (1.0 - s));
                    grads[*a] += &da;
                }
                Op::Softplus(a) => {
                    let da = &g * &self.nodes[*a].value.mapv(stable_sigmoid);
                    grads[*a] += &da;
                }
                Op::Exp(a) => {
                    let da = &g * &self.nodes[id].value;
                    grads[*a] += &da;
                }
                Op::Ln(a) => {
                    let da = &g / &self.nodes[*a].value;
                    grads[*a] += &da;
                }
                Op::Square(a) => {
                    let da = &g * &self.nodes[*a].value.mapv(|x| 2.0 * x);
                    grads[*a] += &da;
                }
                Op::LnGamma(a) => {
                    let da = &g * &self.nodes[*a].value.mapv(digamma);
                    grads[*a] += &da;
                }
                Op::Digamma(a) => {
                    let da = &g * &self.nodes[*a].value.mapv(trigamma);
                    grads[*a] += &da;
                }
                Op::MinElem(a, b) => {
                    let av = &self.nodes[*a].value;
                    let bv = &self.nodes[*b].value;
                    let mut da = ArrayD::zeros(av.raw_dim());
                    let mut db = ArrayD::zeros(bv.raw_dim());
                    for (((gi, &x), &y), (dai, dbi)) in g
                        .iter()
                        .zip(av.iter())
                        .zip(bv.iter())
                        .zip(da.iter_mut().zip(db.iter_mut()))
                    {
                        if x <= y {
                            *dai = *gi;
                        } else {
                            *dbi = *gi;
                        }
                    }
                    grads[*a] += &da;
                    grads[*b] += &db;
                }
                Op::ClampConst(a, lo, hi) => {
                    let av = &self.nodes[*a].value;
                    let mut da = g.clone();
                    for (d, &x) in da.iter_mut().zip(av.iter()) {
                        if x <= *lo || x >= *hi {
                            *d = 0.0;
                        }
                    }
                    grads[*a] += &da;
                }
                Op::MaxAxis { input, axis, argmax } => {
                    let mut da = ArrayD::zeros(self.nodes[*input].value.raw_dim());
                    for ((mut lane, &am), &gi) in da
                        .lanes_mut(Axis(*axis))
                        .into_iter()
                        .zip(argmax.iter())
                        .zip(g.iter())
                    {
                        lane[am] += gi;
                    }
                    grads[*input] += &da;
                }
                Op::Repeat { input, axis, .. } => {
                    let summed = g.sum_axis(Axis(*axis)).insert_axis(Axis(*axis));
                    grads[*input] += &summed;
                }
                Op::Concat(parts, axis) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.nodes[p].value.shape()[*axis];
                        let slice = g.slice_each_axis(|ax| {
                            if ax.axis.index() == *axis {
                                ndarray::Slice::from(offset..offset + w)
                            } else {
                                ndarray::Slice::from(..)
                            }
                        });
                        grads[p] += &slice;
                        offset += w;
                    }
                }
                Op::Reshape(a) => {
                    let shape = self.nodes[*a].value.raw_dim();
                    let back = g
                        .as_standard_layout()
                        .into_owned()
                        .into_shape_with_order(shape)
                        .unwrap();
                    grads[*a] += &back;
                }
                Op::Col(a, j) => {
                    let g1 = g.view().into_dimensionality::<Ix1>().unwrap();
                    let mut da = Array2::<f64>::zeros(self.as2(*a).raw_dim());
                    da.column_mut(*j).assign(&g1);
                    grads[*a] += &da.into_dyn();
                }
                Op::SelectIdx(a, i) => {
                    let gv = g.iter().next().copied().unwrap();
                    let mut da = ArrayD::zeros(self.nodes[*a].value.raw_dim());
                    da[*i] += gv;
                    grads[*a] += &da;
                }
                Op::SumAll(a) => {
                    let gv = g.iter().next().copied().unwrap();
                    let da = ArrayD::from_elem(self.nodes[*a].value.raw_dim(), gv);
                    grads[*a] += &da;
                }
                Op::MeanAll(a) => {
                    let n = self.nodes[*a].value.len() as f64;
                    let gv = g.iter().next().copied().unwrap() / n;
                    let da = ArrayD::from_elem(self.nodes[*a].value.raw_dim(), gv);
                    grads[*a] += &da;
                }
                Op::LogSumExp(a) => {
                    let gv = g.iter().next().copied().unwrap();
                    let lse = self.scalar(id);
                    let da = self.nodes[*a].value.mapv(|z| gv * (z - lse).exp());
                    grads[*a] += &da;
                }
            }
        }
        Ok(grads)
    }

    /// Recomputes every non-leaf node from its inputs and checks the stored
    /// values bit-exactly. Used by tests to validate tape integrity.
    pub fn replay_check(&self) -> bool {
        let mut replica = Graph::new();
        for node in &self.nodes {
            let id = match &node.op {
                Op::Leaf => replica.leaf(node.value.clone()),
                Op::MatMul(a, b) => replica.matmul(*a, *b),
                Op::AddBias(a, b) => replica.add_bias(*a, *b),
                Op::Add(a, b) => replica.add(*a, *b),
                Op::Sub(a, b) => replica.sub(*a, *b),
                Op::Mul(a, b) => replica.mul(*a, *b),
                Op::Div(a, b) => replica.div(*a, *b),
                Op::SubScalar(a, s) => replica.sub_scalar(*a, *s),
                Op::Neg(a) => replica.neg(*a),
                Op::Scale(a, c) => replica.scale(*a, *c),
                Op::AddConst(a, c) => replica.add_const(*a, *c),
                Op::Tanh(a) => replica.tanh(*a),
                Op::Sigmoid(a) => replica.sigmoid(*a),
                Op::Softplus(a) => replica.softplus(*a),
                Op::Exp(a) => replica.exp(*a),
                Op::Ln(a) => replica.ln(*a),
                Op::Square(a) => replica.square(*a),
                Op::LnGamma(a) => replica.ln_gamma(*a),
                Op::Digamma(a) => replica.digamma_node(*a),
                Op::MinElem(a, b) => replica.min_elem(*a, *b),
                Op::ClampConst(a, lo, hi) => replica.clamp_const(*a, *lo, *hi),
                Op::MaxAxis { input, axis, .. } => replica.max_axis(*input, *axis),
                Op::Repeat { input, axis, count } => replica.repeat(*input, *axis, *count),
                Op::Concat(parts, axis) => replica.concat(parts, *axis),
                Op::Reshape(a) => replica.reshape(*a, node.value.shape()),
                Op::Col(a, j) => replica.col(*a, *j),
                Op::SelectIdx(a, i) => replica.select_idx(*a, *i),
                Op::SumAll(a) => replica.sum_all(*a),
                Op::MeanAll(a) => replica.mean_all(*a),
                Op::LogSumExp(a) => replica.log_sum_exp(*a),
            };
            if replica.nodes[id].value != node.value {
                return false;
            }
        }
        true
    }
}
