//! Trajectory collection and the multi-instance PPO training loop.
//!
//! Per iteration: run the collection policy on every (instance, actor) cell
//! for one episode each, compute advantages and returns, then take epochs of
//! shuffled minibatch Adam steps on the clipped loss, and finally promote
//! the optimized parameters to collection policy. Collection and minibatch
//! gradients are computed in parallel with per-trajectory rng streams and a
//! fixed reduction order, so results do not depend on thread scheduling.

use super::{compute_gae, ppo_loss, returns_to_go, reward, LossParts, PpoHyperParams, Sample};
use crate::adapt::{generation_step, AdaptationMethod, SampleMode};
use crate::error::{Error, Result};
use crate::evo::{init_population, EvolutionConfig};
use crate::net::{NetworkParams, StateTensor};
use crate::problems::{ProblemClass, ProblemInstance};
use crate::rng::{self, ctx};
use crate::dist::Action;
use ndarray::prelude::*;
use rand::Rng;
use rayon::prelude::*;

/// One collected episode.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<StateTensor>,
    pub actions: Vec<Action>,
    pub old_log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    pub initial_best: f64,
    pub final_best: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    fn into_samples(self) -> Vec<Sample> {
        self.states
            .into_iter()
            .zip(self.actions)
            .zip(self.old_log_probs)
            .zip(self.advantages)
            .zip(self.returns)
            .map(|((((state, action), old_log_prob), advantage), return_target)| Sample {
                state,
                action,
                old_log_prob,
                advantage,
                return_target,
            })
            .collect()
    }
}

/// Runs the collection policy for one episode of `cfg.episode_length`
/// generations and records states, actions, log-probabilities, rewards,
/// value estimates, advantages, and returns.
pub fn collect_trajectory(
    method: AdaptationMethod,
    params: &NetworkParams,
    problem: &ProblemInstance,
    cfg: &EvolutionConfig,
    hp: &PpoHyperParams,
    rng: &mut impl Rng,
) -> Result<Trajectory> {
    let big_t = cfg.episode_length;
    let mut pop = init_population(problem, cfg, method.per_gene_steps(), rng)?;
    let initial_best = pop.best_fitness();
    let mut states = Vec::with_capacity(big_t);
    let mut actions = Vec::with_capacity(big_t);
    let mut old_log_probs = Vec::with_capacity(big_t);
    let mut rewards = Vec::with_capacity(big_t);
    let mut values = Vec::with_capacity(big_t);
    for t in 0..big_t {
        let outcome = generation_step(
            Some(method),
            Some(params),
            &pop,
            problem,
            cfg,
            t,
            big_t,
            SampleMode::Stochastic,
            rng,
        )?;
        let step = outcome.step.expect("controlled step always records");
        rewards.push(reward(pop.best_fitness(), outcome.next.best_fitness(), hp.reward_scale)?);
        states.push(step.state);
        actions.push(step.action);
        old_log_probs.push(step.log_prob);
        values.push(step.value);
        pop = outcome.next;
    }
    let advantages = compute_gae(&rewards, &values, hp.gamma, hp.lambda)?;
    let returns = returns_to_go(&rewards, hp.gamma);
    Ok(Trajectory {
        states,
        actions,
        old_log_probs,
        rewards,
        values,
        advantages,
        returns,
        initial_best,
        final_best: pop.best_fitness(),
    })
}

/// Adam optimizer over the network's parameter tensors, with f64 moment
/// state and in-place f32 parameter updates.
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<ArrayD<f64>>,
    v: Vec<ArrayD<f64>>,
}

impl Adam {
    pub fn new(lr: f64, params: &NetworkParams) -> Self {
        let shapes: Vec<ArrayD<f64>> = params
            .tensors()
            .iter()
            .map(|t| ArrayD::zeros(t.raw_dim()))
            .collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: shapes.clone(),
            v: shapes,
        }
    }

    /// One update step; `grads` in canonical tensor order.
    pub fn step(&mut self, params: &mut NetworkParams, grads: &[ArrayD<f64>]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let mut tensors = params.tensors();
        for (i, g) in grads.iter().enumerate() {
            self.m[i].zip_mut_with(g, |m, &gv| *m = self.beta1 * *m + (1.0 - self.beta1) * gv);
            self.v[i]
                .zip_mut_with(g, |v, &gv| *v = self.beta2 * *v + (1.0 - self.beta2) * gv * gv);
            let m = &self.m[i];
            let v = &self.v[i];
            for ((p, &mi), &vi) in tensors[i].iter_mut().zip(m.iter()).zip(v.iter()) {
                let m_hat = mi / bc1;
                let v_hat = vi / bc2;
                *p -= (self.lr * m_hat / (v_hat.sqrt() + self.eps)) as f32;
            }
        }
        params.set_tensors(&tensors);
    }
}

/// Training progress for one iteration.
#[derive(Debug, Clone, Copy)]
pub struct TrainProgress {
    pub iteration: usize,
    pub mean_return: f64,
    pub loss: f64,
    pub clip_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

/// Rescales advantages to zero mean and unit variance across the batch.
fn normalize_advantages(samples: &mut [Sample]) {
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.advantage).sum::<f64>() / n;
    let var = samples
        .iter()
        .map(|s| (s.advantage - mean) * (s.advantage - mean))
        .sum::<f64>()
        / n;
    let sd = var.sqrt().max(1e-12);
    for s in samples.iter_mut() {
        s.advantage = (s.advantage - mean) / sd;
    }
}

fn finite_grads(grads: &[ArrayD<f64>]) -> bool {
    grads.iter().all(|g| g.iter().all(|v| v.is_finite()))
}

/// Mean loss and gradients over a minibatch, computed sample-parallel and
/// reduced in index order.
fn batch_loss_grads(
    samples: &[Sample],
    indices: &[usize],
    params: &NetworkParams,
    hp: &PpoHyperParams,
) -> Result<(f64, LossParts, Vec<ArrayD<f64>>)> {
    let pt = params.lift();
    let head = params.head;
    let per: Vec<Result<(f64, LossParts, Vec<ArrayD<f64>>)>> = indices
        .par_iter()
        .map(|&i| {
            let built = ppo_loss(std::slice::from_ref(&samples[i]), &pt, &head, hp)?;
            let grads = built.graph.backward(built.loss)?;
            let param_grads: Vec<ArrayD<f64>> = built
                .param_ids
                .iter()
                .map(|&id| grads[id].clone())
                .collect();
            Ok((built.graph.scalar(built.loss), built.parts, param_grads))
        })
        .collect();

    let n = indices.len() as f64;
    let mut loss = 0.0;
    let mut parts = LossParts::default();
    let mut acc: Option<Vec<ArrayD<f64>>> = None;
    for item in per {
        let (l, p, g) = item?;
        loss += l;
        parts.clip += p.clip;
        parts.value += p.value;
        parts.entropy += p.entropy;
        match &mut acc {
            None => acc = Some(g),
            Some(a) => {
                for (ai, gi) in a.iter_mut().zip(&g) {
                    *ai += gi;
                }
            }
        }
    }
    let mut grads = acc.unwrap();
    for g in &mut grads {
        g.mapv_inplace(|v| v / n);
    }
    loss /= n;
    parts.clip /= n;
    parts.value /= n;
    parts.entropy /= n;
    Ok((loss, parts, grads))
}

/// Trains one agent: `hp.iterations` iterations of collection over the
/// `K x actors` grid followed by shuffled minibatch optimization.
///
/// `on_progress` receives one record per iteration; `on_checkpoint` is
/// called with the iteration index whenever `checkpoint_interval` divides it
/// (and once at the end with the final parameters).
pub fn train(
    method: AdaptationMethod,
    problems: &[ProblemInstance],
    cfg: &EvolutionConfig,
    hp: &PpoHyperParams,
    seed: u64,
    checkpoint_interval: usize,
    mut on_progress: impl FnMut(&TrainProgress),
    mut on_checkpoint: impl FnMut(usize, &NetworkParams) -> Result<()>,
) -> Result<NetworkParams> {
    if problems.is_empty() {
        return Err(Error::invalid("training needs at least one instance"));
    }
    hp.validate()?;
    let class = problems[0].class();
    if problems.iter().any(|p| p.class() != class) {
        return Err(Error::invalid("training instances must share one problem class"));
    }
    let tsp_nodes = if class == ProblemClass::Tsp { problems[0].genome_size() } else { 0 };
    if class == ProblemClass::Tsp && problems.iter().any(|p| p.genome_size() != tsp_nodes) {
        return Err(Error::invalid("TSP training instances must share one node count"));
    }
    cfg.validate(class)?;
    let sample_budget = problems.len() * hp.actors * cfg.episode_length;
    if hp.minibatch_size > sample_budget {
        return Err(Error::invalid(format!(
            "minibatch size {} exceeds samples per iteration {sample_budget}",
            hp.minibatch_size
        )));
    }

    let head = method.head_spec(class, tsp_nodes)?;
    let mut params = NetworkParams::init(
        method.id(),
        head,
        rng::derive_seed(seed, &[ctx::PARAMS]),
    );
    let mut adam = Adam::new(hp.learning_rate, &params);

    for iteration in 0..hp.iterations {
        // collect with the current policy; it stays frozen during the epochs
        let theta_old = params.clone();
        let cells: Vec<(usize, usize)> = (0..problems.len())
            .flat_map(|k| (0..hp.actors).map(move |a| (k, a)))
            .collect();
        let trajectories: Vec<Trajectory> = cells
            .par_iter()
            .map(|&(k, a)| {
                let mut r = rng::stream(
                    seed,
                    &[ctx::TRAJECTORY, iteration as u64, k as u64, a as u64],
                );
                collect_trajectory(method, &theta_old, &problems[k], cfg, hp, &mut r)
            })
            .collect::<Result<_>>()?;
        let mean_return = trajectories.iter().map(|t| t.total_reward()).sum::<f64>()
            / trajectories.len() as f64;
        let mut samples: Vec<Sample> = trajectories
            .into_iter()
            .flat_map(|t| t.into_samples())
            .collect();
        debug_assert_eq!(samples.len(), sample_budget);
        if hp.normalize_advantages {
            normalize_advantages(&mut samples);
        }

        let mut last = (0.0, LossParts::default());
        for epoch in 0..hp.epochs {
            let mut order: Vec<usize> = (0..samples.len()).collect();
            let mut r = rng::stream(seed, &[ctx::SHUFFLE, iteration as u64, epoch as u64]);
            for i in (1..order.len()).rev() {
                let j = r.random_range(0..=i);
                order.swap(i, j);
            }
            for chunk in order.chunks(hp.minibatch_size) {
                let (loss, parts, grads) = batch_loss_grads(&samples, chunk, &params, hp)
                    .map_err(|e| match e {
                        Error::TrainingDivergence { detail, .. } => {
                            Error::TrainingDivergence { iteration, detail }
                        }
                        other => other,
                    })?;
                if !loss.is_finite() || !finite_grads(&grads) {
                    return Err(Error::TrainingDivergence {
                        iteration,
                        detail: "non-finite loss or gradient".to_string(),
                    });
                }
                adam.step(&mut params, &grads);
                last = (loss, parts);
            }
        }
        on_progress(&TrainProgress {
            iteration,
            mean_return,
            loss: last.0,
            clip_loss: last.1.clip,
            value_loss: last.1.value,
            entropy: last.1.entropy,
        });
        if checkpoint_interval > 0 && (iteration + 1) % checkpoint_interval == 0 {
            on_checkpoint(iteration + 1, &params)?;
        }
    }
    Ok(params)
}
