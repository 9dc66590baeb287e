//! Proximal policy optimization: clipped surrogate objective, generalized
//! advantage estimation with the terminal value forced to zero, value loss
//! against discounted returns-to-go, and an entropy bonus.

mod trainer;

pub use trainer::{collect_trajectory, train, Adam, TrainProgress, Trajectory};

use crate::adapt::AdaptationMethod;
use crate::dist::{build_head, entropy_node, log_prob_node, Action};
use crate::error::{Error, Result};
use crate::net::{forward_with, register_params, HeadSpec, ParamTensors, StateTensor};
use crate::problems::ProblemClass;
use crate::tape::{Graph, NodeId};

/// PPO hyperparameters. `reward_scale` is the factor applied inside the
/// per-generation reward; the remaining fields drive the optimization loop.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoHyperParams {
    pub gamma: f64,
    pub lambda: f64,
    pub clip_epsilon: f64,
    pub value_loss_weight: f64,
    pub entropy_weight: f64,
    pub reward_scale: f64,
    pub learning_rate: f64,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub iterations: usize,
    pub actors: usize,
    /// Rescale each iteration's advantages to zero mean and unit variance
    /// before the epochs. Off by default: the loss then uses the advantage
    /// estimates exactly as computed.
    pub normalize_advantages: bool,
}

impl PpoHyperParams {
    /// Per-method training hyperparameters (learning rate, minibatch size,
    /// epochs, entropy coefficient, actor count), with the shared settings
    /// gamma = lambda = 0.99, epsilon = 0.2, value weight 0.5, and reward
    /// scale 100 for the combinatorial classes and 1 for continuous.
    pub fn defaults_for(method: AdaptationMethod, class: ProblemClass) -> Result<Self> {
        use AdaptationMethod::*;
        use ProblemClass::*;
        if !method.applies_to(class) {
            return Err(Error::invalid(format!(
                "method `{}` does not apply to `{}`",
                method.id(),
                class.as_str()
            )));
        }
        let (learning_rate, minibatch_size, epochs, entropy_weight, actors) =
            match (method, class) {
                (FitnessShaping, Knapsack) => (1e-4, 200, 8, 1e-4, 4),
                (FitnessShaping, Continuous) => (5e-4, 400, 8, 1e-4, 4),
                (SurvivorSelection, Knapsack) => (1e-4, 400, 4, 1e-4, 4),
                (SurvivorSelection, Continuous) => (1e-4, 800, 8, 1e-4, 4),
                (PopMutationRate, Knapsack) => (1e-4, 800, 4, 1e-4, 4),
                (PopStrategyParam, Continuous) => (1e-4, 400, 4, 1e-4, 4),
                (OperatorSelection, Tsp) => (1e-4, 400, 8, 1e-2, 2),
                (IndMutationRate, Knapsack) => (5e-4, 400, 4, 1e-4, 4),
                (IndStrategyParam, Continuous) => (1e-4, 400, 4, 1e-4, 4),
                (IndStepSize, Continuous) => (1e-3, 400, 8, 1e-4, 4),
                (ParentSelection, Knapsack) => (1e-4, 400, 8, 1e-3, 4),
                (ParentSelection, Continuous) => (1e-4, 800, 8, 1e-3, 4),
                (ComponentBinaryMutation, Knapsack) => (5e-4, 200, 4, 1e-4, 8),
                (ComponentStepSize, Continuous) => (5e-4, 800, 8, 1e-4, 8),
                _ => return Err(Error::invalid("unsupported method/class pairing")),
            };
        Ok(PpoHyperParams {
            gamma: 0.99,
            lambda: 0.99,
            clip_epsilon: 0.2,
            value_loss_weight: 0.5,
            entropy_weight,
            reward_scale: default_reward_scale(class),
            learning_rate,
            minibatch_size,
            epochs,
            iterations: 500,
            actors,
            normalize_advantages: false,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma", self.gamma), ("lambda", self.lambda)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1]")));
            }
        }
        if !(self.clip_epsilon > 0.0) {
            return Err(Error::invalid("clip_epsilon must be positive"));
        }
        if self.minibatch_size == 0 || self.actors == 0 {
            return Err(Error::invalid("minibatch_size and actors must be positive"));
        }
        Ok(())
    }
}

/// Reward scale: 100 for knapsack and TSP, 1 for continuous optimization.
pub fn default_reward_scale(class: ProblemClass) -> f64 {
    match class {
        ProblemClass::Knapsack | ProblemClass::Tsp => 100.0,
        ProblemClass::Continuous => 1.0,
    }
}

/// Per-generation reward: `alpha_r * log10(f_next / f_prev)`, so rewards
/// telescope to the log-ratio of terminal and initial best fitness.
pub fn reward(f_max_prev: f64, f_max_next: f64, alpha_r: f64) -> Result<f64> {
    if !(f_max_prev > 0.0) || !(f_max_next > 0.0) {
        return Err(Error::invalid(
            "reward requires strictly positive best-fitness values",
        ));
    }
    Ok(alpha_r * (f_max_next / f_max_prev).log10())
}

/// Generalized advantage estimation over one episode.
///
/// `values[t]` are the critic estimates for the recorded states; the value
/// after the final transition is forced to zero because the episode ends.
/// Computed by the standard backward recursion, equivalent to the truncated
/// double sum.
pub fn compute_gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Result<Vec<f64>> {
    if rewards.len() != values.len() {
        return Err(Error::invalid("rewards and values must have equal length"));
    }
    if rewards.is_empty() {
        return Err(Error::invalid("episode must have at least one step"));
    }
    let t_max = rewards.len();
    let mut adv = vec![0.0; t_max];
    let mut acc = 0.0;
    for t in (0..t_max).rev() {
        let next_value = if t + 1 < t_max { values[t + 1] } else { 0.0 };
        let delta = gamma * next_value + rewards[t] - values[t];
        acc = delta + gamma * lambda * acc;
        adv[t] = acc;
    }
    Ok(adv)
}

/// Discounted returns-to-go, the critic's regression targets.
pub fn returns_to_go(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

/// One PPO training sample: a recorded state transition with everything the
/// loss needs.
#[derive(Debug, Clone)]
pub struct Sample {
    pub state: StateTensor,
    pub action: Action,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub return_target: f64,
}

/// Mean values of the three loss terms over a batch.
#[derive(Debug, Clone, Copy, Default)]
pub struct LossParts {
    pub clip: f64,
    pub value: f64,
    pub entropy: f64,
}

/// A built loss graph, ready for `backward` on `loss`.
pub struct LossGraph {
    pub graph: Graph,
    pub loss: NodeId,
    pub param_ids: Vec<NodeId>,
    pub parts: LossParts,
}

/// Builds the loss contribution of one sample on an existing graph.
/// Returns the 0-d nodes (sample loss, clip term, value term, entropy).
fn build_sample_loss(
    g: &mut Graph,
    ids: &crate::net::ParamNodeIds,
    head: &HeadSpec,
    sample: &Sample,
    hp: &PpoHyperParams,
) -> Result<(NodeId, NodeId, NodeId, NodeId)> {
    let (raw, value) = forward_with(g, &sample.state, ids, head)?;
    let head_nodes = build_head(g, raw, head.kind)?;
    let logp = log_prob_node(g, &head_nodes, &sample.action)?;
    let entropy = entropy_node(g, &head_nodes);

    // clipped surrogate: -min(r * A, clip(r) * A) with r the probability
    // ratio against the collection-time policy
    let shifted = g.add_const(logp, -sample.old_log_prob);
    let ratio = g.exp(shifted);
    let unclipped = g.scale(ratio, sample.advantage);
    let clipped_ratio = g.clamp_const(ratio, 1.0 - hp.clip_epsilon, 1.0 + hp.clip_epsilon);
    let clipped = g.scale(clipped_ratio, sample.advantage);
    let objective = g.min_elem(unclipped, clipped);
    let clip_term = g.neg(objective);

    // squared error of the value estimate against the return-to-go
    let v_err = g.add_const(value, -sample.return_target);
    let value_term = g.square(v_err);

    // loss = clip + alpha_v * value + alpha_e * (negative entropy)
    let weighted_value = g.scale(value_term, hp.value_loss_weight);
    let weighted_entropy = g.scale(entropy, -hp.entropy_weight);
    let s = g.add(clip_term, weighted_value);
    let loss = g.add(s, weighted_entropy);
    Ok((loss, clip_term, value_term, entropy))
}

/// Tape-free PPO loss value: the same composition as [`ppo_loss`] computed
/// through the plain forward and distribution paths. Used by the
/// finite-difference gradient checks, where only values are needed.
pub fn ppo_loss_value(
    batch: &[Sample],
    pt: &ParamTensors,
    head: &HeadSpec,
    hp: &PpoHyperParams,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("ppo_loss needs a non-empty batch"));
    }
    let mut total = 0.0;
    for sample in batch {
        let (raw, value) = crate::net::forward_value(&sample.state, pt, head)?;
        let dist = crate::dist::apply_output_nonlinearity(&raw, head.kind)?;
        let logp = crate::dist::log_prob_joint(&dist, &sample.action)?;
        let entropy = crate::dist::entropy_joint(&dist);
        let ratio = (logp - sample.old_log_prob).exp();
        let clipped = ratio.clamp(1.0 - hp.clip_epsilon, 1.0 + hp.clip_epsilon);
        let objective = (ratio * sample.advantage).min(clipped * sample.advantage);
        let v_err = value - sample.return_target;
        total += -objective + hp.value_loss_weight * v_err * v_err - hp.entropy_weight * entropy;
    }
    Ok(total / batch.len() as f64)
}

/// Builds the full PPO loss for a batch on one tape: the mean over samples
/// of the clipped objective plus weighted value error and entropy bonus.
pub fn ppo_loss(
    batch: &[Sample],
    pt: &ParamTensors,
    head: &HeadSpec,
    hp: &PpoHyperParams,
) -> Result<LossGraph> {
    if batch.is_empty() {
        return Err(Error::invalid("ppo_loss needs a non-empty batch"));
    }
    let mut g = Graph::new();
    let ids = register_params(&mut g, pt);
    let mut total: Option<NodeId> = None;
    let mut parts = LossParts::default();
    for sample in batch {
        let (loss_i, clip_i, value_i, entropy_i) =
            build_sample_loss(&mut g, &ids, head, sample, hp)?;
        parts.clip += g.scalar(clip_i);
        parts.value += g.scalar(value_i);
        parts.entropy += g.scalar(entropy_i);
        total = Some(match total {
            None => loss_i,
            Some(t) => g.add(t, loss_i),
        });
    }
    let n = batch.len() as f64;
    let loss = g.scale(total.unwrap(), 1.0 / n);
    parts.clip /= n;
    parts.value /= n;
    parts.entropy /= n;
    let loss_value = g.scalar(loss);
    if !loss_value.is_finite() {
        return Err(Error::TrainingDivergence {
            iteration: 0,
            detail: format!("non-finite loss {loss_value}"),
        });
    }
    Ok(LossGraph { graph: g, loss, param_ids: ids.ordered, parts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DistKind;
    use crate::net::{NetworkParams, OutputLevel};
    use crate::rng::{self, ctx};
    use ndarray::prelude::*;
    use rand::Rng;

    #[test]
    fn reward_examples() {
        assert!((reward(10.0, 100.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(reward(3.7, 3.7, 100.0).unwrap(), 0.0);
        assert!(reward(0.0, 1.0, 1.0).is_err());
        assert!(reward(1.0, -2.0, 1.0).is_err());
        assert_eq!(default_reward_scale(ProblemClass::Knapsack), 100.0);
        assert_eq!(default_reward_scale(ProblemClass::Tsp), 100.0);
        assert_eq!(default_reward_scale(ProblemClass::Continuous), 1.0);
    }

    #[test]
    fn gae_short_episode_and_lambda_zero() {
        // T = 1: terminal value is forced to zero
        let adv = compute_gae(&[2.0], &[0.7], 0.9, 0.8).unwrap();
        assert!((adv[0] - (2.0 - 0.7)).abs() < 1e-15);

        // lambda = 0 reduces to one-step temporal differences
        let rewards = [1.0, -0.5, 2.0, 0.3];
        let values = [0.2, 0.4, -0.1, 0.6];
        let adv = compute_gae(&rewards, &values, 0.95, 0.0).unwrap();
        for t in 0..4 {
            let next = if t + 1 < 4 { values[t + 1] } else { 0.0 };
            let delta = 0.95 * next + rewards[t] - values[t];
            assert!((adv[t] - delta).abs() < 1e-15, "t={t}");
        }
        assert!(compute_gae(&[1.0], &[1.0, 2.0], 0.9, 0.9).is_err());
    }

    /// The recursion equals the O(T^2) truncated double sum.
    #[test]
    fn gae_matches_direct_double_sum() {
        let mut r = rng::stream(110, &[ctx::EVAL]);
        let t_max = 50;
        let rewards: Vec<f64> = (0..t_max).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
        let values: Vec<f64> = (0..t_max).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
        let (gamma, lambda) = (0.97, 0.93);
        let adv = compute_gae(&rewards, &values, gamma, lambda).unwrap();
        for t in 0..t_max {
            let mut direct = 0.0;
            for i in 0..(t_max - t) {
                let s = t + i;
                let next = if s + 1 < t_max { values[s + 1] } else { 0.0 };
                let delta = gamma * next + rewards[s] - values[s];
                direct += (gamma * lambda).powi(i as i32) * delta;
            }
            assert!((adv[t] - direct).abs() < 1e-10, "t={t}");
        }
    }

    /// With lambda = 1 and a zero value function, advantages equal the
    /// discounted returns-to-go.
    #[test]
    fn gae_lambda_one_zero_critic_reduces_to_returns() {
        let mut r = rng::stream(111, &[ctx::EVAL]);
        let rewards: Vec<f64> = (0..30).map(|_| r.random::<f64>()).collect();
        let values = vec![0.0; 30];
        let adv = compute_gae(&rewards, &values, 0.9, 1.0).unwrap();
        let rets = returns_to_go(&rewards, 0.9);
        for (a, b) in adv.iter().zip(&rets) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn returns_examples_and_oracle() {
        let rets = returns_to_go(&[0.3, 0.7, -1.0], 0.0);
        assert_eq!(rets, vec![0.3, 0.7, -1.0]);
        let rets = returns_to_go(&[1.0, 1.0, 1.0], 0.5);
        assert_eq!(rets, vec![1.75, 1.5, 1.0]);

        let mut r = rng::stream(112, &[ctx::EVAL]);
        let rewards: Vec<f64> = (0..40).map(|_| r.random::<f64>() * 4.0 - 2.0).collect();
        let gamma = 0.92;
        let rets = returns_to_go(&rewards, gamma);
        for t in 0..40 {
            let direct: f64 = (0..(40 - t))
                .map(|i| gamma.powi(i as i32) * rewards[t + i])
                .sum();
            assert!((rets[t] - direct).abs() < 1e-12, "t={t}");
        }
    }

    fn tiny_samples(params: &NetworkParams, count: usize, seed: u64) -> Vec<Sample> {
        let mut r = rng::stream(seed, &[ctx::EVAL]);
        let pt = params.lift();
        (0..count)
            .map(|_| {
                let state = StateTensor {
                    data: Array3::from_shape_fn((3, 4, 6), |_| r.random::<f64>()),
                    class: ProblemClass::Knapsack,
                };
                let (raw, _) = crate::net::forward_value(&state, &pt, &params.head).unwrap();
                let dist =
                    crate::dist::apply_output_nonlinearity(&raw, params.head.kind).unwrap();
                let action = crate::dist::sample(&dist, &mut r);
                let old_log_prob = crate::dist::log_prob_joint(&dist, &action).unwrap();
                Sample {
                    state,
                    action,
                    old_log_prob,
                    advantage: r.random::<f64>() * 2.0 - 1.0,
                    return_target: r.random::<f64>(),
                }
            })
            .collect()
    }

    /// With the current policy equal to the collection policy, every ratio
    /// is exactly one and the surrogate reduces to the negated mean
    /// advantage.
    #[test]
    fn loss_at_old_policy_is_negative_mean_advantage() {
        let head = HeadSpec {
            class: ProblemClass::Knapsack,
            kind: DistKind::Beta,
            level: OutputLevel::Individual,
            categories: 0,
            tsp_nodes: 0,
        };
        let params = NetworkParams::init("test", head, 1);
        let samples = tiny_samples(&params, 5, 2);
        let hp = PpoHyperParams::defaults_for(
            AdaptationMethod::PopMutationRate,
            ProblemClass::Knapsack,
        )
        .unwrap();
        let built = ppo_loss(&samples, &params.lift(), &head, &hp).unwrap();
        let mean_adv: f64 =
            samples.iter().map(|s| s.advantage).sum::<f64>() / samples.len() as f64;
        assert!(
            (built.parts.clip - (-mean_adv)).abs() < 1e-9,
            "clip {} vs {}",
            built.parts.clip,
            -mean_adv
        );
    }

    #[test]
    fn clip_helper_matches_definition() {
        let mut g = Graph::new();
        let x = g.leaf(arr1(&[1.3, 0.7, 1.0]).into_dyn());
        let c = g.clamp_const(x, 0.8, 1.2);
        assert_eq!(g.value(c).as_slice().unwrap(), &[1.2, 0.8, 1.0]);
    }

    /// Single-sample scalar case with the loss composed from leaf inputs:
    /// value and gradient match the hand-derived closed form.
    ///
    /// With ratio r = exp(l - l_old), A < 0, and r below the lower clip
    /// bound, min picks the clipped branch, so d(loss)/dl = 0; with r
    /// interior the derivative is -A * r. The value term contributes
    /// 2 * alpha_v * (v - R) and the entropy term -alpha_e * dH/dl.
    #[test]
    fn single_sample_closed_form_loss_and_gradient() {
        let hp = PpoHyperParams {
            gamma: 0.99,
            lambda: 0.99,
            clip_epsilon: 0.2,
            value_loss_weight: 0.5,
            entropy_weight: 0.0,
            reward_scale: 1.0,
            learning_rate: 1e-4,
            minibatch_size: 1,
            epochs: 1,
            iterations: 1,
            actors: 1,
            normalize_advantages: false,
        };
        // interior ratio: l = -0.9, l_old = -1.0, A = 0.8, v = 0.3, R = 1.1
        let (l, l_old, a, v, ret) = (-0.9_f64, -1.0_f64, 0.8_f64, 0.3_f64, 1.1_f64);
        let mut g = Graph::new();
        let logp = g.leaf_scalar(l);
        let value = g.leaf_scalar(v);
        let shifted = g.add_const(logp, -l_old);
        let ratio = g.exp(shifted);
        let unclipped = g.scale(ratio, a);
        let clipped_ratio = g.clamp_const(ratio, 0.8, 1.2);
        let clipped = g.scale(clipped_ratio, a);
        let objective = g.min_elem(unclipped, clipped);
        let clip_term = g.neg(objective);
        let v_err = g.add_const(value, -ret);
        let v_term = g.square(v_err);
        let weighted = g.scale(v_term, hp.value_loss_weight);
        let loss = g.add(clip_term, weighted);

        let r = (l - l_old).exp(); // ~1.105, inside the clip band
        let expect_loss = -(r * a).min(r.clamp(0.8, 1.2) * a) + 0.5 * (v - ret) * (v - ret);
        assert!((g.scalar(loss) - expect_loss).abs() < 1e-12);
        let grads = g.backward(loss).unwrap();
        let dl = grads[logp].iter().next().copied().unwrap();
        let dv = grads[value].iter().next().copied().unwrap();
        assert!((dl - (-a * r)).abs() < 1e-12, "d/dlogp {dl}");
        assert!((dv - 2.0 * 0.5 * (v - ret)).abs() < 1e-12, "d/dvalue {dv}");

        // clipped branch: push the ratio above the band with A > 0
        let mut g = Graph::new();
        let logp = g.leaf_scalar(0.5);
        let shifted = g.add_const(logp, 0.0);
        let ratio = g.exp(shifted); // e^0.5 ~ 1.65 > 1.2
        let unclipped = g.scale(ratio, a);
        let clipped_ratio = g.clamp_const(ratio, 0.8, 1.2);
        let clipped = g.scale(clipped_ratio, a);
        let objective = g.min_elem(unclipped, clipped);
        let clip_term = g.neg(objective);
        assert!((g.scalar(clip_term) - (-1.2 * a)).abs() < 1e-12);
        let grads = g.backward(clip_term).unwrap();
        assert_eq!(grads[logp].iter().next().copied().unwrap(), 0.0);
    }

    /// The tape-free loss value equals the graph loss on the same batch.
    #[test]
    fn loss_value_path_matches_graph_path() {
        let head = HeadSpec {
            class: ProblemClass::Knapsack,
            kind: DistKind::Beta,
            level: OutputLevel::Individual,
            categories: 0,
            tsp_nodes: 0,
        };
        let theta_old = NetworkParams::init("test", head, 21);
        let theta = NetworkParams::init("test", head, 22);
        let samples = tiny_samples(&theta_old, 4, 23);
        let hp = PpoHyperParams::defaults_for(
            AdaptationMethod::PopMutationRate,
            ProblemClass::Knapsack,
        )
        .unwrap();
        let built = ppo_loss(&samples, &theta.lift(), &head, &hp).unwrap();
        let plain = ppo_loss_value(&samples, &theta.lift(), &head, &hp).unwrap();
        assert!(
            (built.graph.scalar(built.loss) - plain).abs() < 1e-12,
            "graph {} vs plain {plain}",
            built.graph.scalar(built.loss)
        );
    }

    #[test]
    fn table_defaults_are_wired_per_method() {
        let hp = PpoHyperParams::defaults_for(
            AdaptationMethod::OperatorSelection,
            ProblemClass::Tsp,
        )
        .unwrap();
        assert_eq!(hp.actors, 2);
        assert_eq!(hp.entropy_weight, 1e-2);
        assert_eq!(hp.minibatch_size, 400);
        assert_eq!(hp.epochs, 8);
        assert_eq!(hp.reward_scale, 100.0);
        assert_eq!(hp.gamma, 0.99);
        assert_eq!(hp.lambda, 0.99);
        assert_eq!(hp.clip_epsilon, 0.2);
        assert_eq!(hp.value_loss_weight, 0.5);
        let hp = PpoHyperParams::defaults_for(
            AdaptationMethod::IndStepSize,
            ProblemClass::Continuous,
        )
        .unwrap();
        assert_eq!(hp.learning_rate, 1e-3);
        assert_eq!(hp.reward_scale, 1.0);
        assert!(PpoHyperParams::defaults_for(
            AdaptationMethod::PopStrategyParam,
            ProblemClass::Knapsack
        )
        .is_err());
    }
}
