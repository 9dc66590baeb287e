//! Permutation-equivariant actor-critic network.
//!
//! The shared trunk is three pool-replicate-conv blocks with 64 filters: per
//! channel, features are max-pooled along the population axis and along the
//! genome axis, replicated back, concatenated with the local features, and
//! mixed by a position-wise affine map (a 1x1 convolution) followed by tanh.
//! The critic max-pools the genome axis away, adds population-pooled
//! features, applies a final 1x1 convolution to one channel, and sums the
//! per-individual scalars into the value estimate. The actor applies one
//! more pool-replicate-conv without a nonlinearity, then max-pools to the
//! output level its head requires (per gene, per individual, or one row for
//! the whole population).
//!
//! Parameters are stored as little-endian-serializable f32 (matching the
//! checkpoint format); all computation lifts them to f64.

mod checkpoint;
mod encode;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use encode::{encode_state, EncodeExtra, StateTensor};

use crate::dist::DistKind;
use crate::error::{Error, Result};
use crate::problems::ProblemClass;
use crate::rng::{self, ctx};
use crate::tape::{Graph, NodeId};
use ndarray::prelude::*;
use rand::Rng;

/// Trunk depth (pool-replicate-conv blocks before the heads).
pub const TRUNK_DEPTH: usize = 3;
/// Filters per trunk layer.
pub const FILTERS: usize = 64;

/// Input channels the encoding produces for a problem class (`tsp_nodes`
/// only matters for TSP).
pub fn state_channels(class: ProblemClass, tsp_nodes: usize) -> usize {
    match class {
        ProblemClass::Knapsack => 6,
        ProblemClass::Continuous => 4,
        ProblemClass::Tsp => 5 + 2 * tsp_nodes,
    }
}

/// Output granularity of an actor head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutputLevel {
    /// One row for the whole population (pooled over both axes).
    Population,
    /// One row per individual (pooled over the genome axis).
    Individual,
    /// One row per gene of each individual (no pooling).
    Component,
}

/// What the actor head must produce: problem class, distribution kind, and
/// output granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HeadSpec {
    pub class: ProblemClass,
    pub kind: DistKind,
    pub level: OutputLevel,
    /// Category count for categorical heads (0 otherwise).
    pub categories: usize,
    /// Node count the TSP encoding was built for (0 otherwise).
    pub tsp_nodes: usize,
}

impl HeadSpec {
    pub fn input_channels(&self) -> usize {
        state_channels(self.class, self.tsp_nodes)
    }

    pub fn output_channels(&self) -> usize {
        self.kind.channels(self.categories)
    }
}

/// One 1x1 convolution: a position-wise affine map.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    /// `[in_features, out_features]`.
    pub weight: Array2<f32>,
    pub bias: Array1<f32>,
}

impl ConvLayer {
    fn init(inf: usize, outf: usize, rng: &mut impl Rng) -> Self {
        let scale = 1.0 / (inf as f64).sqrt();
        ConvLayer {
            weight: Array2::from_shape_fn((inf, outf), |_| {
                ((rng.random::<f64>() * 2.0 - 1.0) * scale) as f32
            }),
            bias: Array1::zeros(outf),
        }
    }
}

/// Actor-critic parameters for one adaptation head.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    /// Adaptation-method id this network was built for.
    pub method: String,
    pub head: HeadSpec,
    pub trunk: Vec<ConvLayer>,
    pub actor: ConvLayer,
    pub critic: ConvLayer,
    pub version: u32,
}

impl NetworkParams {
    /// Fan-in-scaled uniform initialization, deterministic in the seed.
    pub fn init(method: &str, head: HeadSpec, seed: u64) -> Self {
        let mut trunk = Vec::with_capacity(TRUNK_DEPTH);
        let mut c_in = head.input_channels();
        for layer in 0..TRUNK_DEPTH {
            let mut r = rng::stream(seed, &[ctx::PARAMS, layer as u64]);
            trunk.push(ConvLayer::init(3 * c_in, FILTERS, &mut r));
            c_in = FILTERS;
        }
        let mut r = rng::stream(seed, &[ctx::PARAMS, 100]);
        let actor = ConvLayer::init(3 * FILTERS, head.output_channels(), &mut r);
        let mut r = rng::stream(seed, &[ctx::PARAMS, 101]);
        let critic = ConvLayer::init(2 * FILTERS, 1, &mut r);
        NetworkParams { method: method.to_string(), head, trunk, actor, critic, version: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trunk.len() != TRUNK_DEPTH {
            return Err(Error::invalid("trunk depth mismatch"));
        }
        let mut c_in = self.head.input_channels();
        for layer in &self.trunk {
            if layer.weight.nrows() != 3 * c_in || layer.weight.ncols() != FILTERS {
                return Err(Error::invalid("trunk layer shape mismatch"));
            }
            c_in = FILTERS;
        }
        if self.actor.weight.nrows() != 3 * FILTERS
            || self.actor.weight.ncols() != self.head.output_channels()
        {
            return Err(Error::invalid("actor layer shape mismatch"));
        }
        if self.critic.weight.nrows() != 2 * FILTERS || self.critic.weight.ncols() != 1 {
            return Err(Error::invalid("critic layer shape mismatch"));
        }
        let finite = self
            .tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::invalid("network parameters must be finite"));
        }
        Ok(())
    }

    /// All parameter tensors in canonical order: trunk (weight, bias) per
    /// layer, then actor, then critic. Gradient vectors use the same order.
    pub fn tensors(&self) -> Vec<ArrayD<f32>> {
        let mut out = Vec::new();
        for l in &self.trunk {
            out.push(l.weight.clone().into_dyn());
            out.push(l.bias.clone().into_dyn());
        }
        out.push(self.actor.weight.clone().into_dyn());
        out.push(self.actor.bias.clone().into_dyn());
        out.push(self.critic.weight.clone().into_dyn());
        out.push(self.critic.bias.clone().into_dyn());
        out
    }

    /// Writes tensors back from canonical order (inverse of [`tensors`]).
    pub fn set_tensors(&mut self, tensors: &[ArrayD<f32>]) {
        let mut it = tensors.iter();
        for l in &mut self.trunk {
            l.weight = it.next().unwrap().clone().into_dimensionality().unwrap();
            l.bias = it.next().unwrap().clone().into_dimensionality().unwrap();
        }
        self.actor.weight = it.next().unwrap().clone().into_dimensionality().unwrap();
        self.actor.bias = it.next().unwrap().clone().into_dimensionality().unwrap();
        self.critic.weight = it.next().unwrap().clone().into_dimensionality().unwrap();
        self.critic.bias = it.next().unwrap().clone().into_dimensionality().unwrap();
    }

    pub fn lift(&self) -> ParamTensors {
        ParamTensors {
            trunk: self
                .trunk
                .iter()
                .map(|l| (l.weight.mapv(f64::from), l.bias.mapv(f64::from)))
                .collect(),
            actor: (self.actor.weight.mapv(f64::from), self.actor.bias.mapv(f64::from)),
            critic: (self.critic.weight.mapv(f64::from), self.critic.bias.mapv(f64::from)),
        }
    }
}

/// f64 working copy of the parameters used by all computation.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensors {
    pub trunk: Vec<(Array2<f64>, Array1<f64>)>,
    pub actor: (Array2<f64>, Array1<f64>),
    pub critic: (Array2<f64>, Array1<f64>),
}

impl ParamTensors {
    /// Flat view in canonical tensor order (weights and biases interleaved).
    pub fn flat(&self) -> Vec<ArrayD<f64>> {
        let mut out = Vec::new();
        for (w, b) in &self.trunk {
            out.push(w.clone().into_dyn());
            out.push(b.clone().into_dyn());
        }
        out.push(self.actor.0.clone().into_dyn());
        out.push(self.actor.1.clone().into_dyn());
        out.push(self.critic.0.clone().into_dyn());
        out.push(self.critic.1.clone().into_dyn());
        out
    }

    pub fn from_flat(trunk_depth: usize, flat: &[ArrayD<f64>]) -> Self {
        let mut it = flat.iter();
        let mut trunk = Vec::with_capacity(trunk_depth);
        for _ in 0..trunk_depth {
            let w = it.next().unwrap().clone().into_dimensionality().unwrap();
            let b = it.next().unwrap().clone().into_dimensionality().unwrap();
            trunk.push((w, b));
        }
        let aw = it.next().unwrap().clone().into_dimensionality().unwrap();
        let ab = it.next().unwrap().clone().into_dimensionality().unwrap();
        let cw = it.next().unwrap().clone().into_dimensionality().unwrap();
        let cb = it.next().unwrap().clone().into_dimensionality().unwrap();
        ParamTensors { trunk, actor: (aw, ab), critic: (cw, cb) }
    }
}

/// Graph node ids of the registered parameters, in canonical tensor order.
#[derive(Debug, Clone)]
pub struct ParamNodeIds {
    pub ordered: Vec<NodeId>,
}

/// Registers every parameter tensor as a graph leaf.
pub fn register_params(g: &mut Graph, pt: &ParamTensors) -> ParamNodeIds {
    let ordered = pt.flat().into_iter().map(|t| g.leaf(t)).collect();
    ParamNodeIds { ordered }
}

fn validate_state(state: &StateTensor, head: &HeadSpec) -> Result<()> {
    if state.class != head.class {
        return Err(Error::invalid("state class does not match network head"));
    }
    if state.channels() != head.input_channels() {
        return Err(Error::invalid(format!(
            "state has {} channels, head expects {}",
            state.channels(),
            head.input_channels()
        )));
    }
    Ok(())
}

/// One pool-replicate-conv block on the graph: per channel, max over the
/// population axis and over the genome axis, replicated back, concatenated
/// with the local features, then mixed by a position-wise affine map.
/// `weight`/`bias` are node ids; `nonlinear` applies the trunk tanh.
pub fn pool_replicate_conv(
    g: &mut Graph,
    x: NodeId,
    weight: NodeId,
    bias: NodeId,
    nonlinear: bool,
) -> NodeId {
    let shape = g.value(x).shape().to_vec();
    let (p, gg, c) = (shape[0], shape[1], shape[2]);
    let mp = g.max_axis(x, 0);
    let mp_rep = g.repeat(mp, 0, p);
    let gp = g.max_axis(x, 1);
    let gp_rep = g.repeat(gp, 1, gg);
    let cat = g.concat(&[x, mp_rep, gp_rep], 2);
    let flat = g.reshape(cat, &[p * gg, 3 * c]);
    let y = g.matmul(flat, weight);
    let yb = g.add_bias(y, bias);
    let out_c = g.value(yb).shape()[1];
    let shaped = g.reshape(yb, &[p, gg, out_c]);
    if nonlinear {
        g.tanh(shaped)
    } else {
        shaped
    }
}

/// Forward pass on an existing graph with already-registered parameters.
/// Returns the raw actor output node (`[rows, channels]`, pooled to the
/// head's level) and the 0-d value-estimate node.
pub fn forward_with(
    g: &mut Graph,
    state: &StateTensor,
    ids: &ParamNodeIds,
    head: &HeadSpec,
) -> Result<(NodeId, NodeId)> {
    validate_state(state, head)?;
    let p = state.rows();
    let gg = state.genome_size();
    let mut x = g.leaf(state.data.clone().into_dyn());
    for layer in 0..TRUNK_DEPTH {
        x = pool_replicate_conv(g, x, ids.ordered[2 * layer], ids.ordered[2 * layer + 1], true);
    }

    // critic: drop the genome axis, add population-pooled features, mix to
    // one scalar per individual, sum
    let per_ind = g.max_axis(x, 1);
    let per_ind2 = g.reshape(per_ind, &[p, FILTERS]);
    let pooled = g.max_axis(per_ind2, 0);
    let pooled_rep = g.repeat(pooled, 0, p);
    let cat = g.concat(&[per_ind2, pooled_rep], 1);
    let (cw, cb) = (ids.ordered[2 * TRUNK_DEPTH + 2], ids.ordered[2 * TRUNK_DEPTH + 3]);
    let scalars = g.matmul(cat, cw);
    let scalars_b = g.add_bias(scalars, cb);
    let value = g.sum_all(scalars_b);

    // actor: one more pool-replicate-conv (raw, no nonlinearity), then pool
    // to the head's output level
    let (aw, ab) = (ids.ordered[2 * TRUNK_DEPTH], ids.ordered[2 * TRUNK_DEPTH + 1]);
    let raw3 = pool_replicate_conv(g, x, aw, ab, false);
    let c_out = head.output_channels();
    let raw = match head.level {
        OutputLevel::Component => g.reshape(raw3, &[p * gg, c_out]),
        OutputLevel::Individual => {
            let pooled = g.max_axis(raw3, 1);
            g.reshape(pooled, &[p, c_out])
        }
        OutputLevel::Population => {
            let pg = g.max_axis(raw3, 1);
            let ppg = g.max_axis(pg, 0);
            g.reshape(ppg, &[1, c_out])
        }
    };
    Ok((raw, value))
}

/// Convenience single-pass forward: builds a fresh tape and returns the raw
/// actor output values, the value estimate, and the tape.
pub fn forward(state: &StateTensor, params: &NetworkParams) -> Result<(Array2<f64>, f64, Graph)> {
    let pt = params.lift();
    let mut g = Graph::new();
    let ids = register_params(&mut g, &pt);
    let (raw, value) = forward_with(&mut g, state, &ids, &params.head)?;
    let raw_v = g
        .value(raw)
        .view()
        .into_dimensionality::<Ix2>()
        .unwrap()
        .to_owned();
    let value_v = g.scalar(value);
    Ok((raw_v, value_v, g))
}

// ---------------------------------------------------------------------------
// tape-free forward (used by finite-difference checks and collection)
// ---------------------------------------------------------------------------

fn max_axis3(x: &Array3<f64>, axis: usize) -> Array3<f64> {
    let mut shape = [x.shape()[0], x.shape()[1], x.shape()[2]];
    shape[axis] = 1;
    let mut out = Array3::zeros((shape[0], shape[1], shape[2]));
    for (lane, slot) in x.lanes(Axis(axis)).into_iter().zip(out.iter_mut()) {
        *slot = lane.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    }
    out
}

fn prc_value(x: &Array3<f64>, w: &Array2<f64>, b: &Array1<f64>, nonlinear: bool) -> Array3<f64> {
    let (p, gg, c) = x.dim();
    let mp = max_axis3(x, 0);
    let gp = max_axis3(x, 1);
    let mut cat = Array3::zeros((p, gg, 3 * c));
    for i in 0..p {
        for j in 0..gg {
            for k in 0..c {
                cat[[i, j, k]] = x[[i, j, k]];
                cat[[i, j, c + k]] = mp[[0, j, k]];
                cat[[i, j, 2 * c + k]] = gp[[i, 0, k]];
            }
        }
    }
    let flat = cat.into_shape_with_order((p * gg, 3 * c)).unwrap();
    let mut y = flat.dot(w);
    y += b;
    if nonlinear {
        y.mapv_inplace(f64::tanh);
    }
    y.into_shape_with_order((p, gg, w.ncols())).unwrap()
}

/// Tape-free forward pass: raw actor output (pooled to the head level) and
/// the value estimate.
pub fn forward_value(
    state: &StateTensor,
    pt: &ParamTensors,
    head: &HeadSpec,
) -> Result<(Array2<f64>, f64)> {
    validate_state(state, head)?;
    let p = state.rows();
    let mut x = state.data.clone();
    for (w, b) in &pt.trunk {
        x = prc_value(&x, w, b, true);
    }

    let per_ind3 = max_axis3(&x, 1);
    let per_ind = per_ind3.into_shape_with_order((p, FILTERS)).unwrap();
    let mut cat = Array2::zeros((p, 2 * FILTERS));
    for k in 0..FILTERS {
        let col_max = per_ind.column(k).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for i in 0..p {
            cat[[i, k]] = per_ind[[i, k]];
            cat[[i, FILTERS + k]] = col_max;
        }
    }
    let mut scalars = cat.dot(&pt.critic.0);
    scalars += &pt.critic.1;
    let value = scalars.sum();

    let raw3 = prc_value(&x, &pt.actor.0, &pt.actor.1, false);
    let c_out = head.output_channels();
    let gg = state.genome_size();
    let raw = match head.level {
        OutputLevel::Component => raw3.into_shape_with_order((p * gg, c_out)).unwrap(),
        OutputLevel::Individual => max_axis3(&raw3, 1)
            .into_shape_with_order((p, c_out))
            .unwrap(),
        OutputLevel::Population => max_axis3(&max_axis3(&raw3, 1), 0)
            .into_shape_with_order((1, c_out))
            .unwrap(),
    };
    Ok((raw, value))
}
