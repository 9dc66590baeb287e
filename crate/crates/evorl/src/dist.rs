//! The four stochastic-policy action distributions: Bernoulli, beta,
//! categorical, and normal.
//!
//! Two parallel surfaces are provided. The plain functions operate on f64
//! arrays and serve trajectory collection (sampling, log-probabilities,
//! deterministic means). The `*_node` functions build the same quantities on
//! a [`Graph`] from raw network outputs, so the PPO loss can differentiate
//! through the output nonlinearities, densities, and entropies. Tests pin
//! both paths to each other.
//!
//! Downstream transforms of sampled actions (softplus, exp) are part of
//! executing the action and never enter the densities.

use crate::error::{Error, Result};
use crate::rng::open_unit;
use crate::special::{digamma, ln_beta};
use crate::tape::{stable_sigmoid, stable_softplus, Graph, NodeId};
use ndarray::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::beta::beta_reg;

/// Standard-deviation floor applied inside normal densities to avoid log(0).
pub const SIGMA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistKind {
    Bernoulli,
    Beta,
    Categorical,
    Normal,
}

impl DistKind {
    /// Raw output channels the network must produce for this kind.
    pub fn channels(&self, categories: usize) -> usize {
        match self {
            DistKind::Bernoulli => 1,
            DistKind::Beta | DistKind::Normal => 2,
            DistKind::Categorical => categories,
        }
    }
}

/// Element-wise distribution parameters after the output nonlinearity.
///
/// A value describes `n` independent scalar distributions (one categorical
/// distribution counts as a single element).
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionParams {
    Bernoulli { p: Array1<f64> },
    Beta { alpha: Array1<f64>, beta: Array1<f64> },
    Categorical { probs: Array1<f64> },
    Normal { mean: Array1<f64>, std: Array1<f64> },
}

/// A sampled action: dense element values, or one categorical index.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Dense(Array1<f64>),
    Index(usize),
}

impl Action {
    pub fn as_dense(&self) -> Result<&Array1<f64>> {
        match self {
            Action::Dense(a) => Ok(a),
            Action::Index(_) => Err(Error::invalid("expected a dense action")),
        }
    }

    pub fn as_index(&self) -> Result<usize> {
        match self {
            Action::Index(i) => Ok(*i),
            Action::Dense(_) => Err(Error::invalid("expected a categorical action")),
        }
    }
}

/// Maps raw network outputs `[n, c]` to distribution parameters:
/// sigmoid for Bernoulli, identity/softplus for normal mean/std,
/// softplus + 1 for beta, softmax for categorical.
pub fn apply_output_nonlinearity(raw: &Array2<f64>, kind: DistKind) -> Result<DistributionParams> {
    let check = |want: usize| -> Result<()> {
        if raw.ncols() != want {
            Err(Error::invalid(format!(
                "{kind:?} head needs {want} channels, got {}",
                raw.ncols()
            )))
        } else {
            Ok(())
        }
    };
    match kind {
        DistKind::Bernoulli => {
            check(1)?;
            Ok(DistributionParams::Bernoulli {
                p: raw.column(0).mapv(stable_sigmoid),
            })
        }
        DistKind::Normal => {
            check(2)?;
            Ok(DistributionParams::Normal {
                mean: raw.column(0).to_owned(),
                std: raw.column(1).mapv(stable_softplus),
            })
        }
        DistKind::Beta => {
            check(2)?;
            Ok(DistributionParams::Beta {
                alpha: raw.column(0).mapv(|z| stable_softplus(z) + 1.0),
                beta: raw.column(1).mapv(|z| stable_softplus(z) + 1.0),
            })
        }
        DistKind::Categorical => {
            if raw.nrows() != 1 {
                return Err(Error::invalid("categorical head expects a single row"));
            }
            let z = raw.row(0);
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Array1<f64> = z.mapv(|v| (v - m).exp());
            let total = exps.sum();
            Ok(DistributionParams::Categorical { probs: exps / total })
        }
    }
}

/// Inverse-CDF beta sampling: one uniform draw, then bisection on the
/// regularized incomplete beta function. Rejection-free, so the rng stream
/// advances by exactly one draw per sample.
fn beta_inverse_cdf(alpha: f64, beta: f64, u: f64) -> f64 {
    debug_assert!(u > 0.0 && u < 1.0);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..70 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(alpha, beta, mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    x.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
}

/// Element-wise independent samples.
pub fn sample(params: &DistributionParams, rng: &mut impl Rng) -> Action {
    match params {
        DistributionParams::Bernoulli { p } => {
            Action::Dense(p.mapv(|pi| if open_unit(rng) < pi { 1.0 } else { 0.0 }))
        }
        DistributionParams::Beta { alpha, beta } => Action::Dense(Array1::from_iter(
            alpha
                .iter()
                .zip(beta)
                .map(|(&a, &b)| beta_inverse_cdf(a, b, open_unit(rng))),
        )),
        DistributionParams::Categorical { probs } => {
            let u = open_unit(rng);
            let mut acc = 0.0;
            for (i, &p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return Action::Index(i);
                }
            }
            Action::Index(probs.len() - 1)
        }
        DistributionParams::Normal { mean, std } => {
            Action::Dense(Array1::from_iter(mean.iter().zip(std).map(|(&m, &s)| {
                let z: f64 = StandardNormal.sample(rng);
                m + s * z
            })))
        }
    }
}

/// Deterministic action: the distribution mean. Defined for beta and normal
/// kinds only; discrete kinds stay sampled even during evaluation.
pub fn mean_action(params: &DistributionParams) -> Result<Action> {
    match params {
        DistributionParams::Beta { alpha, beta } => Ok(Action::Dense(Array1::from_iter(
            alpha.iter().zip(beta).map(|(&a, &b)| a / (a + b)),
        ))),
        DistributionParams::Normal { mean, .. } => Ok(Action::Dense(mean.clone())),
        _ => Err(Error::invalid(
            "mean_action is defined for beta and normal distributions only",
        )),
    }
}

/// Element-wise log density/mass of an action.
pub fn log_prob(params: &DistributionParams, action: &Action) -> Result<Array1<f64>> {
    match (params, action) {
        (DistributionParams::Bernoulli { p }, Action::Dense(a)) => {
            if a.len() != p.len() {
                return Err(Error::invalid("action length mismatch"));
            }
            let mut out = Array1::zeros(p.len());
            for ((o, &pi), &ai) in out.iter_mut().zip(p).zip(a) {
                *o = if ai == 1.0 {
                    pi.ln()
                } else if ai == 0.0 {
                    (1.0 - pi).ln()
                } else {
                    return Err(Error::invalid("Bernoulli action must be 0 or 1"));
                };
            }
            Ok(out)
        }
        (DistributionParams::Beta { alpha, beta }, Action::Dense(x)) => {
            if x.len() != alpha.len() {
                return Err(Error::invalid("action length mismatch"));
            }
            let mut out = Array1::zeros(x.len());
            for (((o, &a), &b), &xi) in out.iter_mut().zip(alpha).zip(beta).zip(x) {
                if !(xi > 0.0 && xi < 1.0) {
                    return Err(Error::invalid("beta action must lie strictly inside (0, 1)"));
                }
                *o = (a - 1.0) * xi.ln() + (b - 1.0) * (1.0 - xi).ln() - ln_beta(a, b);
            }
            Ok(out)
        }
        (DistributionParams::Categorical { probs }, Action::Index(k)) => {
            let p = probs
                .get(*k)
                .ok_or_else(|| Error::invalid("categorical index out of range"))?;
            Ok(arr1(&[p.ln()]))
        }
        (DistributionParams::Normal { mean, std }, Action::Dense(x)) => {
            if x.len() != mean.len() {
                return Err(Error::invalid("action length mismatch"));
            }
            let mut out = Array1::zeros(x.len());
            for (((o, &m), &s), &xi) in out.iter_mut().zip(mean).zip(std).zip(x) {
                let sf = s.max(SIGMA_FLOOR);
                let d = xi - m;
                *o = -sf.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - d * d / (2.0 * sf * sf);
            }
            Ok(out)
        }
        _ => Err(Error::invalid("action kind does not match distribution kind")),
    }
}

/// Joint log-probability: the sum over independent elements.
pub fn log_prob_joint(params: &DistributionParams, action: &Action) -> Result<f64> {
    Ok(log_prob(params, action)?.sum())
}

/// Element-wise analytic entropy.
pub fn entropy(params: &DistributionParams) -> Array1<f64> {
    match params {
        DistributionParams::Bernoulli { p } => p.mapv(|pi| {
            let q = 1.0 - pi;
            let t1 = if pi > 0.0 { -pi * pi.ln() } else { 0.0 };
            let t2 = if q > 0.0 { -q * q.ln() } else { 0.0 };
            t1 + t2
        }),
        DistributionParams::Beta { alpha, beta } => {
            Array1::from_iter(alpha.iter().zip(beta).map(|(&a, &b)| {
                ln_beta(a, b) - (a - 1.0) * digamma(a) - (b - 1.0) * digamma(b)
                    + (a + b - 2.0) * digamma(a + b)
            }))
        }
        DistributionParams::Categorical { probs } => {
            let h = probs
                .iter()
                .map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 })
                .sum();
            arr1(&[h])
        }
        DistributionParams::Normal { std, .. } => std.mapv(|s| {
            let sf = s.max(SIGMA_FLOOR);
            sf.ln() + 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln()
        }),
    }
}

/// Joint entropy of the independent elements.
pub fn entropy_joint(params: &DistributionParams) -> f64 {
    entropy(params).sum()
}

// ---------------------------------------------------------------------------
// graph-side (differentiable) construction from raw network outputs
// ---------------------------------------------------------------------------

/// Distribution parameters as graph nodes, built from a raw `[n, c]` output.
#[derive(Debug, Clone)]
pub enum HeadNodes {
    Bernoulli { z: NodeId },
    Beta { alpha: NodeId, beta: NodeId },
    Normal { mu: NodeId, sigma: NodeId },
    Categorical { z: NodeId },
}

/// Applies the output nonlinearity on the graph. `raw` must be `[n, c]`.
pub fn build_head(g: &mut Graph, raw: NodeId, kind: DistKind) -> Result<HeadNodes> {
    let shape = g.value(raw).shape().to_vec();
    if shape.len() != 2 {
        return Err(Error::invalid("head input must be 2-d"));
    }
    let (n, c) = (shape[0], shape[1]);
    match kind {
        DistKind::Bernoulli => {
            if c != 1 {
                return Err(Error::invalid("Bernoulli head needs 1 channel"));
            }
            let z = g.col(raw, 0);
            Ok(HeadNodes::Bernoulli { z })
        }
        DistKind::Normal => {
            if c != 2 {
                return Err(Error::invalid("normal head needs 2 channels"));
            }
            let mu = g.col(raw, 0);
            let zs = g.col(raw, 1);
            let sigma = g.softplus(zs);
            Ok(HeadNodes::Normal { mu, sigma })
        }
        DistKind::Beta => {
            if c != 2 {
                return Err(Error::invalid("beta head needs 2 channels"));
            }
            let za = g.col(raw, 0);
            let zb = g.col(raw, 1);
            let spa = g.softplus(za);
            let spb = g.softplus(zb);
            let alpha = g.add_const(spa, 1.0);
            let beta = g.add_const(spb, 1.0);
            Ok(HeadNodes::Beta { alpha, beta })
        }
        DistKind::Categorical => {
            if n != 1 {
                return Err(Error::invalid("categorical head expects a single row"));
            }
            let z = g.reshape(raw, &[c]);
            Ok(HeadNodes::Categorical { z })
        }
    }
}

/// Extracts plain distribution parameters from the head nodes.
pub fn head_params(g: &Graph, head: &HeadNodes) -> DistributionParams {
    let vec1 = |id: NodeId| -> Array1<f64> {
        g.value(id)
            .view()
            .into_dimensionality::<Ix1>()
            .unwrap()
            .to_owned()
    };
    match head {
        HeadNodes::Bernoulli { z } => DistributionParams::Bernoulli {
            p: vec1(*z).mapv(stable_sigmoid),
        },
        HeadNodes::Beta { alpha, beta } => DistributionParams::Beta {
            alpha: vec1(*alpha),
            beta: vec1(*beta),
        },
        HeadNodes::Normal { mu, sigma } => DistributionParams::Normal {
            mean: vec1(*mu),
            std: vec1(*sigma),
        },
        HeadNodes::Categorical { z } => {
            let z = vec1(*z);
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Array1<f64> = z.mapv(|v| (v - m).exp());
            let total = exps.sum();
            DistributionParams::Categorical { probs: exps / total }
        }
    }
}

/// Joint log-probability of `action` as a 0-d node.
pub fn log_prob_node(g: &mut Graph, head: &HeadNodes, action: &Action) -> Result<NodeId> {
    match head {
        HeadNodes::Bernoulli { z } => {
            let a = action.as_dense()?;
            let av = g.leaf(a.clone().into_dyn());
            let one_minus_a = g.leaf(a.mapv(|x| 1.0 - x).into_dyn());
            // log p = -softplus(-z) for a = 1, -softplus(z) for a = 0
            let nz = g.neg(*z);
            let sp_nz = g.softplus(nz);
            let sp_z = g.softplus(*z);
            let t1 = g.mul(av, sp_nz);
            let t2 = g.mul(one_minus_a, sp_z);
            let s = g.add(t1, t2);
            let total = g.sum_all(s);
            Ok(g.neg(total))
        }
        HeadNodes::Beta { alpha, beta } => {
            let x = action.as_dense()?;
            if x.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
                return Err(Error::invalid("beta action must lie strictly inside (0, 1)"));
            }
            let ln_x = g.leaf(x.mapv(f64::ln).into_dyn());
            let ln_1mx = g.leaf(x.mapv(|v| (1.0 - v).ln()).into_dyn());
            let am1 = g.add_const(*alpha, -1.0);
            let bm1 = g.add_const(*beta, -1.0);
            let t1 = g.mul(am1, ln_x);
            let t2 = g.mul(bm1, ln_1mx);
            let ab = g.add(*alpha, *beta);
            let lg_ab = g.ln_gamma(ab);
            let lg_a = g.ln_gamma(*alpha);
            let lg_b = g.ln_gamma(*beta);
            let s1 = g.add(t1, t2);
            let s2 = g.add(s1, lg_ab);
            let s3 = g.sub(s2, lg_a);
            let s4 = g.sub(s3, lg_b);
            Ok(g.sum_all(s4))
        }
        HeadNodes::Normal { mu, sigma } => {
            let x = action.as_dense()?;
            let xv = g.leaf(x.clone().into_dyn());
            let sf = g.clamp_const(*sigma, SIGMA_FLOOR, f64::INFINITY);
            let diff = g.sub(xv, *mu);
            let d2 = g.square(diff);
            let s2 = g.square(sf);
            let denom = g.scale(s2, 2.0);
            let frac = g.div(d2, denom);
            let ln_s = g.ln(sf);
            let t = g.add(ln_s, frac);
            let c = g.add_const(t, 0.5 * (2.0 * std::f64::consts::PI).ln());
            let total = g.sum_all(c);
            Ok(g.neg(total))
        }
        HeadNodes::Categorical { z } => {
            let k = action.as_index()?;
            if k >= g.value(*z).len() {
                return Err(Error::invalid("categorical index out of range"));
            }
            let lse = g.log_sum_exp(*z);
            let zk = g.select_idx(*z, k);
            Ok(g.sub(zk, lse))
        }
    }
}

/// Joint entropy as a 0-d node.
pub fn entropy_node(g: &mut Graph, head: &HeadNodes) -> NodeId {
    match head {
        HeadNodes::Bernoulli { z } => {
            let p = g.sigmoid(*z);
            let nz = g.neg(*z);
            let sp_nz = g.softplus(nz);
            let sp_z = g.softplus(*z);
            let np = g.neg(p);
            let q = g.add_const(np, 1.0);
            let t1 = g.mul(p, sp_nz);
            let t2 = g.mul(q, sp_z);
            let h = g.add(t1, t2);
            g.sum_all(h)
        }
        HeadNodes::Beta { alpha, beta } => {
            let ab = g.add(*alpha, *beta);
            let lg_a = g.ln_gamma(*alpha);
            let lg_b = g.ln_gamma(*beta);
            let lg_ab = g.ln_gamma(ab);
            let s1 = g.add(lg_a, lg_b);
            let ln_b = g.sub(s1, lg_ab);
            let am1 = g.add_const(*alpha, -1.0);
            let bm1 = g.add_const(*beta, -1.0);
            let abm2 = g.add_const(ab, -2.0);
            let dg_a = g.digamma_node(*alpha);
            let dg_b = g.digamma_node(*beta);
            let dg_ab = g.digamma_node(ab);
            let t1 = g.mul(am1, dg_a);
            let t2 = g.mul(bm1, dg_b);
            let t3 = g.mul(abm2, dg_ab);
            let s2 = g.sub(ln_b, t1);
            let s3 = g.sub(s2, t2);
            let h = g.add(s3, t3);
            g.sum_all(h)
        }
        HeadNodes::Normal { sigma, .. } => {
            let sf = g.clamp_const(*sigma, SIGMA_FLOOR, f64::INFINITY);
            let ln_s = g.ln(sf);
            let h = g.add_const(
                ln_s,
                0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln(),
            );
            g.sum_all(h)
        }
        HeadNodes::Categorical { z } => {
            let lse = g.log_sum_exp(*z);
            let zc = g.sub_scalar(*z, lse);
            let p = g.exp(zc);
            let pz = g.mul(p, *z);
            let s = g.sum_all(pz);
            g.sub(lse, s)
        }
    }
}
