//! Executes one policy-controlled generation: encode the state, query the
//! network, sample an action, run the (partially overridden) baseline
//! pipeline, and hand back the records PPO training needs.

use super::AdaptationMethod;
use crate::dist::{
    apply_output_nonlinearity, log_prob_joint, mean_action, sample, Action, DistKind,
};
use crate::error::{Error, Result};
use crate::evo::{
    function_value, make_offspring, ranked_indices, survivors, tsp_offspring, tsp_pairs,
    CrossoverOp, EvolutionConfig, Genome, Population, StageOverrides,
};
use crate::net::{encode_state, forward_value, EncodeExtra, NetworkParams, StateTensor};
use crate::problems::{ProblemClass, ProblemInstance};
use crate::tape::stable_softplus;
use rand::Rng;

/// Action selection during rollouts: sample, or take the distribution mean
/// (beta/normal heads only; discrete heads always sample).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    Stochastic,
    DeterministicMean,
}

/// What PPO records per controlled generation.
#[derive(Debug, Clone)]
pub struct PolicyStep {
    pub state: StateTensor,
    pub action: Action,
    pub log_prob: f64,
    pub value: f64,
}

/// Result of one generation step.
#[derive(Debug)]
pub struct GenerationOutcome {
    pub next: Population,
    /// Policy record; absent for baseline generations.
    pub step: Option<PolicyStep>,
    /// Times an all-zero parent mask fell back to the full population.
    pub mask_fallbacks: usize,
    /// Active evolution-parameter values, for run traces.
    pub trace: TraceRow,
}

/// Per-generation trace of the active evolution parameters.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub mutation_rate: f64,
    pub strategy_param: f64,
    pub operator: Option<CrossoverOp>,
}

/// Multiplies fitness values with the shaping factors: raw factors for
/// knapsack, `exp` of them for continuous problems (whose fitness spans many
/// orders of magnitude).
pub fn shape_fitness(fitness: &[f64], eps: &[f64], class: ProblemClass) -> Result<Vec<f64>> {
    if fitness.len() != eps.len() {
        return Err(Error::invalid("fitness shaping vector length mismatch"));
    }
    Ok(match class {
        ProblemClass::Continuous => fitness.iter().zip(eps).map(|(f, e)| f * e.exp()).collect(),
        _ => fitness.iter().zip(eps).map(|(f, e)| f * e).collect(),
    })
}

/// Keeps the `population_size` individuals with the highest sampled scores
/// out of parents + offspring, replacing elitism entirely. Ties break to the
/// lower global index (parents before offspring).
pub fn select_survivors_by_score(
    parents: &Population,
    offspring: &Population,
    scores: &[f64],
) -> Result<Population> {
    let total = parents.len() + offspring.len();
    if scores.len() != total {
        return Err(Error::invalid(format!(
            "survivor scores must cover parents + offspring ({total})"
        )));
    }
    let keep = parents.len();
    let take = |i: usize| -> (&Genome, f64) {
        if i < parents.len() {
            (&parents.genomes[i], parents.fitness[i])
        } else {
            (&offspring.genomes[i - parents.len()], offspring.fitness[i - parents.len()])
        }
    };
    let mut genomes = Vec::with_capacity(keep);
    let mut fitness = Vec::with_capacity(keep);
    for &i in ranked_indices(scores).iter().take(keep) {
        let (g, f) = take(i);
        genomes.push(g.clone());
        fitness.push(f);
    }
    Ok(Population::new(genomes, fitness, parents.generation + 1))
}

/// Queries the policy on a state and draws an action.
fn act(
    state: &StateTensor,
    params: &NetworkParams,
    mode: SampleMode,
    rng: &mut impl Rng,
) -> Result<PolicyStep> {
    let pt = params.lift();
    let (raw, value) = forward_value(state, &pt, &params.head)?;
    let dist = apply_output_nonlinearity(&raw, params.head.kind)?;
    let deterministic = mode == SampleMode::DeterministicMean
        && matches!(params.head.kind, DistKind::Beta | DistKind::Normal);
    let action = if deterministic {
        mean_action(&dist)?
    } else {
        sample(&dist, rng)
    };
    let log_prob = log_prob_joint(&dist, &action)?;
    Ok(PolicyStep { state: state.clone(), action, log_prob, value })
}

fn softplus_vec(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&z| stable_softplus(z)).collect()
}

/// Decodes a sampled action into stage overrides for the baseline pipeline.
/// Returns the overrides, the fallback count (all-zero parent masks), and a
/// representative (rate, tau) pair for traces.
pub fn decode_action(
    method: AdaptationMethod,
    action: &Action,
    pop_size: usize,
    genome_size: usize,
    class: ProblemClass,
) -> Result<(StageOverrides, usize, Option<f64>, Option<f64>)> {
    let mut ovr = StageOverrides::default();
    let mut fallbacks = 0;
    let mut rate = None;
    let mut tau = None;
    let expect_len = |a: &Action, n: usize| -> Result<Vec<f64>> {
        let d = a.as_dense()?;
        if d.len() != n {
            return Err(Error::invalid(format!(
                "action has {} elements, expected {n}",
                d.len()
            )));
        }
        Ok(d.to_vec())
    };
    match method {
        AdaptationMethod::FitnessShaping => {
            let eps = expect_len(action, pop_size)?;
            ovr.fitness_scale = Some(match class {
                ProblemClass::Continuous => eps.iter().map(|e| e.exp()).collect(),
                _ => eps,
            });
        }
        AdaptationMethod::SurvivorSelection => {
            return Err(Error::contract(
                "survivor selection is applied after offspring creation",
            ));
        }
        AdaptationMethod::PopMutationRate => {
            let v = expect_len(action, 1)?;
            ovr.mutation_rate = Some(v[0]);
            rate = Some(v[0]);
        }
        AdaptationMethod::PopStrategyParam => {
            let v = expect_len(action, 1)?;
            let t = stable_softplus(v[0]);
            ovr.strategy_param = Some(t);
            tau = Some(t);
        }
        AdaptationMethod::OperatorSelection => {
            let k = action.as_index()?;
            ovr.operator = Some(CrossoverOp::from_index(k)?);
        }
        AdaptationMethod::IndMutationRate => {
            let v = expect_len(action, pop_size)?;
            rate = Some(v.iter().sum::<f64>() / v.len() as f64);
            ovr.mutation_rate_per_child = Some(v);
        }
        AdaptationMethod::IndStrategyParam => {
            let v = softplus_vec(&expect_len(action, pop_size)?);
            tau = Some(v.iter().sum::<f64>() / v.len() as f64);
            ovr.strategy_param_per_individual = Some(v);
        }
        AdaptationMethod::IndStepSize => {
            let v = softplus_vec(&expect_len(action, pop_size)?);
            ovr.step_multiplier_per_individual = Some(v);
        }
        AdaptationMethod::ParentSelection => {
            let mask = expect_len(action, pop_size)?;
            let picked: Vec<usize> = mask
                .iter()
                .enumerate()
                .filter(|(_, &m)| m == 1.0)
                .map(|(i, _)| i)
                .collect();
            if picked.is_empty() {
                // a legal action selected nobody: fall back to the full
                // population and count the event
                fallbacks += 1;
                ovr.parent_candidates = Some((0..pop_size).collect());
            } else {
                ovr.parent_candidates = Some(picked);
            }
        }
        AdaptationMethod::ComponentBinaryMutation => {
            let flat = expect_len(action, pop_size * genome_size)?;
            let mask: Vec<Vec<u8>> = flat
                .chunks(genome_size)
                .map(|row| row.iter().map(|&m| (m == 1.0) as u8).collect())
                .collect();
            ovr.flip_mask = Some(mask);
        }
        AdaptationMethod::ComponentStepSize => {
            let flat = softplus_vec(&expect_len(action, pop_size * genome_size)?);
            let mults: Vec<Vec<f64>> = flat.chunks(genome_size).map(|c| c.to_vec()).collect();
            ovr.step_multiplier_per_gene = Some(mults);
        }
    }
    Ok((ovr, fallbacks, rate, tau))
}

/// Runs one generation: baseline when `method` is `None`, otherwise the
/// method's controlled pipeline.
pub fn generation_step(
    method: Option<AdaptationMethod>,
    params: Option<&NetworkParams>,
    pop: &Population,
    problem: &ProblemInstance,
    cfg: &EvolutionConfig,
    t: usize,
    big_t: usize,
    mode: SampleMode,
    rng: &mut impl Rng,
) -> Result<GenerationOutcome> {
    let class = problem.class();
    let mut trace = TraceRow {
        generation: pop.generation,
        best_fitness: pop.best_fitness(),
        mean_fitness: pop.mean_fitness(),
        mutation_rate: cfg.mutation_rate,
        strategy_param: cfg.strategy_parameter,
        operator: match (class, cfg.crossover_operator) {
            (ProblemClass::Tsp, crate::evo::OperatorChoice::Fixed(op)) => Some(op),
            _ => None,
        },
    };

    let (method, params) = match (method, params) {
        (Some(m), Some(p)) => (m, p),
        (None, _) => {
            let offspring = make_offspring(pop, problem, cfg, &StageOverrides::default(), rng)?;
            let next = survivors(pop, &offspring, cfg)?;
            return Ok(GenerationOutcome { next, step: None, mask_fallbacks: 0, trace });
        }
        (Some(_), None) => {
            return Err(Error::invalid("controlled generation needs network parameters"))
        }
    };
    if !method.applies_to(class) {
        return Err(Error::invalid(format!(
            "method `{}` does not apply to `{}`",
            method.id(),
            class.as_str()
        )));
    }

    match method {
        AdaptationMethod::SurvivorSelection => {
            let offspring = make_offspring(pop, problem, cfg, &StageOverrides::default(), rng)?;
            // the network scores the concatenated parent + offspring
            // population encoded as one 2P x G x C state
            let mut genomes = pop.genomes.clone();
            genomes.extend(offspring.genomes.iter().cloned());
            let mut fitness = pop.fitness.clone();
            fitness.extend_from_slice(&offspring.fitness);
            let combined = Population::new(genomes, fitness, pop.generation);
            let state = encode_state(&combined, problem, t, big_t, EncodeExtra::None)?;
            let step = act(&state, params, mode, rng)?;
            let scores = step.action.as_dense()?.to_vec();
            let next = select_survivors_by_score(pop, &offspring, &scores)?;
            Ok(GenerationOutcome { next, step: Some(step), mask_fallbacks: 0, trace })
        }
        AdaptationMethod::OperatorSelection => {
            let pairs = tsp_pairs(pop, &StageOverrides::default(), rng)?;
            let state = encode_state(&pop.clone(), problem, t, big_t, EncodeExtra::TspPairs(&pairs))?;
            let step = act(&state, params, mode, rng)?;
            let op = CrossoverOp::from_index(step.action.as_index()?)?;
            trace.operator = Some(op);
            let ovr = StageOverrides { operator: Some(op), ..Default::default() };
            let offspring = tsp_offspring(pop, problem, cfg, &pairs, &ovr, rng)?;
            let next = survivors(pop, &offspring, cfg)?;
            Ok(GenerationOutcome { next, step: Some(step), mask_fallbacks: 0, trace })
        }
        _ => {
            let state = encode_state(pop, problem, t, big_t, EncodeExtra::None)?;
            let step = act(&state, params, mode, rng)?;
            let (ovr, fallbacks, rate, tau) = decode_action(
                method,
                &step.action,
                pop.len(),
                problem.genome_size(),
                class,
            )?;
            if let Some(r) = rate {
                trace.mutation_rate = r;
            }
            if let Some(t) = tau {
                trace.strategy_param = t;
            }
            let offspring = make_offspring(pop, problem, cfg, &ovr, rng)?;
            let next = survivors(pop, &offspring, cfg)?;
            Ok(GenerationOutcome { next, step: Some(step), mask_fallbacks: fallbacks, trace })
        }
    }
}

/// Full-episode record for evaluation: best fitness per generation
/// (including the initial population), best objective value per generation
/// for continuous problems, and the parameter trace.
#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub best_fitness: Vec<f64>,
    pub best_function_value: Option<Vec<f64>>,
    pub trace: Vec<TraceRow>,
    pub mask_fallbacks: usize,
}

/// Runs a full episode of `cfg.episode_length` generations and records the
/// per-generation metrics.
pub fn run_episode(
    method: Option<AdaptationMethod>,
    params: Option<&NetworkParams>,
    problem: &ProblemInstance,
    cfg: &EvolutionConfig,
    mode: SampleMode,
    rng: &mut impl Rng,
) -> Result<EpisodeRecord> {
    let per_gene = method.map(|m| m.per_gene_steps()).unwrap_or(false);
    let continuous = problem.class() == ProblemClass::Continuous;
    let mut pop = crate::evo::init_population(problem, cfg, per_gene, rng)?;
    let big_t = cfg.episode_length;
    let mut best_fitness = Vec::with_capacity(big_t + 1);
    let mut best_g = if continuous { Some(Vec::with_capacity(big_t + 1)) } else { None };
    let mut trace = Vec::with_capacity(big_t);
    let mut fallbacks = 0;

    let record_g = |pop: &Population, out: &mut Option<Vec<f64>>| -> Result<()> {
        if let Some(v) = out {
            let g = pop
                .genomes
                .iter()
                .map(|genome| function_value(genome, problem))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            v.push(g);
        }
        Ok(())
    };

    best_fitness.push(pop.best_fitness());
    record_g(&pop, &mut best_g)?;
    for t in 0..big_t {
        let outcome = generation_step(method, params, &pop, problem, cfg, t, big_t, mode, rng)?;
        fallbacks += outcome.mask_fallbacks;
        trace.push(outcome.trace);
        pop = outcome.next;
        best_fitness.push(pop.best_fitness());
        record_g(&pop, &mut best_g)?;
    }
    Ok(EpisodeRecord {
        best_fitness,
        best_function_value: best_g,
        trace,
        mask_fallbacks: fallbacks,
    })
}
