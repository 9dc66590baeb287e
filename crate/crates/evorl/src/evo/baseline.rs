//! The three baseline generation pipelines.
//!
//! One generation is recombination, mutation, and survivor selection. Every
//! stage can be overridden through [`StageOverrides`], which is how the
//! learned adaptation methods plug in; with the default (empty) overrides
//! the pipelines are exactly the baseline algorithms.
//!
//! Per-child overrides (mutation rates, flip masks) are indexed by offspring
//! order: child `i` uses row `i` of the override.

use super::ops::{
    bitflip_mutation, elitism_survivor_selection, inversion_mutation, perturb_real,
    step_size_multiplier, tournament_select_restricted, truncation_select_parents, tsp_crossover,
    uniform_crossover, ALL_OPERATORS,
};
use super::{CrossoverOp, EvolutionConfig, Genome, OperatorChoice, Population, RealGenome, StepSize};
use crate::error::{Error, Result};
use crate::problems::{
    continuous_fitness, eval_objective, knapsack_fitness, repair_knapsack, tsp_fitness,
    ProblemClass, ProblemInstance, DOMAIN_HI, DOMAIN_LO,
};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Per-generation parameter and stage replacements sampled by a controller.
#[derive(Debug, Clone, Default)]
pub struct StageOverrides {
    /// Multiplied elementwise into fitness before parent selection only;
    /// survivor selection and rewards keep true fitness.
    pub fitness_scale: Option<Vec<f64>>,
    /// Restricts parent selection to these indices.
    pub parent_candidates: Option<Vec<usize>>,
    /// Mutation rate for every child this generation.
    pub mutation_rate: Option<f64>,
    /// Mutation rate per child (length = population size).
    pub mutation_rate_per_child: Option<Vec<f64>>,
    /// Replaces the bit-flip stage: child i flips exactly the bits set in
    /// row i.
    pub flip_mask: Option<Vec<Vec<u8>>>,
    /// Strategy parameter for every child this generation.
    pub strategy_param: Option<f64>,
    /// Strategy parameter per population individual (children inherit their
    /// parent's value).
    pub strategy_param_per_individual: Option<Vec<f64>>,
    /// Step-size multipliers per population individual; replaces the
    /// log-normal self-adaptation step.
    pub step_multiplier_per_individual: Option<Vec<f64>>,
    /// Step-size multipliers per gene of each individual; replaces the
    /// log-normal step and enables per-gene steps.
    pub step_multiplier_per_gene: Option<Vec<Vec<f64>>>,
    /// Crossover operator for this generation (TSP).
    pub operator: Option<CrossoverOp>,
}

/// Evaluates one genome against a problem instance. Knapsack genomes must
/// already be feasible.
pub fn evaluate_genome(genome: &Genome, problem: &ProblemInstance) -> Result<f64> {
    match (genome, problem) {
        (Genome::Binary(b), ProblemInstance::Knapsack(k)) => knapsack_fitness(b, k),
        (Genome::Perm(p), ProblemInstance::Tsp(t)) => tsp_fitness(p, t),
        (Genome::Real(r), ProblemInstance::Continuous(f)) => {
            let g = eval_objective(f, &[r.x[0], r.x[1]])?;
            continuous_fitness(g)
        }
        _ => Err(Error::invalid("genome kind does not match problem class")),
    }
}

/// Raw objective value (continuous problems only), used by the MBFv metric.
pub fn function_value(genome: &Genome, problem: &ProblemInstance) -> Result<f64> {
    let r = genome.as_real()?;
    let f = problem.as_continuous()?;
    eval_objective(f, &[r.x[0], r.x[1]])
}

/// Initial population for a problem instance.
///
/// Knapsack: fair-coin bits, repaired. TSP: uniform random permutations.
/// Continuous: uniform points with the configured initial step-size
/// (per-gene step-sizes when `per_gene_steps` is set).
pub fn init_population(
    problem: &ProblemInstance,
    cfg: &EvolutionConfig,
    per_gene_steps: bool,
    rng: &mut impl Rng,
) -> Result<Population> {
    cfg.validate(problem.class())?;
    let n = problem.genome_size();
    let mut genomes = Vec::with_capacity(cfg.population_size);
    for _ in 0..cfg.population_size {
        let genome = match problem {
            ProblemInstance::Knapsack(k) => {
                let bits: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
                Genome::Binary(repair_knapsack(&bits, k, rng))
            }
            ProblemInstance::Tsp(_) => {
                let mut p: Vec<usize> = (0..n).collect();
                for i in (1..n).rev() {
                    let j = rng.random_range(0..=i);
                    p.swap(i, j);
                }
                Genome::Perm(p)
            }
            ProblemInstance::Continuous(_) => {
                let x: Vec<f64> = (0..n)
                    .map(|_| DOMAIN_LO + rng.random::<f64>() * (DOMAIN_HI - DOMAIN_LO))
                    .collect();
                let step = if per_gene_steps {
                    StepSize::PerGene(vec![cfg.initial_step_size; n])
                } else {
                    StepSize::Scalar(cfg.initial_step_size)
                };
                Genome::Real(RealGenome { x, step })
            }
        };
        genomes.push(genome);
    }
    let fitness: Result<Vec<f64>> = genomes.iter().map(|g| evaluate_genome(g, problem)).collect();
    Ok(Population::new(genomes, fitness?, 0))
}

fn shaped_fitness(pop: &Population, ovr: &StageOverrides) -> Result<Vec<f64>> {
    match &ovr.fitness_scale {
        None => Ok(pop.fitness.clone()),
        Some(scale) => {
            if scale.len() != pop.len() {
                return Err(Error::invalid("fitness scale length mismatch"));
            }
            Ok(pop.fitness.iter().zip(scale).map(|(f, s)| f * s).collect())
        }
    }
}

fn parent_candidates(pop: &Population, ovr: &StageOverrides) -> Vec<usize> {
    match &ovr.parent_candidates {
        Some(c) => c.clone(),
        None => (0..pop.len()).collect(),
    }
}

fn child_rate(cfg: &EvolutionConfig, ovr: &StageOverrides, child: usize) -> Result<f64> {
    if let Some(rates) = &ovr.mutation_rate_per_child {
        rates
            .get(child)
            .copied()
            .ok_or_else(|| Error::invalid("per-child mutation rate vector too short"))
    } else if let Some(rate) = ovr.mutation_rate {
        Ok(rate)
    } else {
        Ok(cfg.mutation_rate)
    }
}

/// Knapsack offspring: tournament pairs, uniform crossover, bit-flip (or a
/// controller's flip mask), then repair. Population size must be even; each
/// pair contributes two children.
fn knapsack_offspring(
    pop: &Population,
    problem: &ProblemInstance,
    cfg: &EvolutionConfig,
    ovr: &StageOverrides,
    rng: &mut impl Rng,
) -> Result<Population> {
    let inst = problem.as_knapsack()?;
    let shaped = shaped_fitness(pop, ovr)?;
    let candidates = parent_candidates(pop, ovr);
    let pairs = tournament_select_restricted(&shaped, &candidates, pop.len() / 2, rng)?;
    let mut children: Vec<Vec<u8>> = Vec::with_capacity(pop.len());
    for &(a, b) in &pairs {
        let p1 = pop.genomes[a].as_binary()?;
        let p2 = pop.genomes[b].as_binary()?;
        let (c1, c2) = uniform_crossover(p1, p2, cfg.crossover_rate, rng)?;
        children.push(c1);
        children.push(c2);
    }
    let mutated: Result<Vec<Vec<u8>>> = children
        .into_iter()
        .enumerate()
        .map(|(i, child)| {
            if let Some(mask) = &ovr.flip_mask {
                let row = mask
                    .get(i)
                    .ok_or_else(|| Error::invalid("flip mask has too few rows"))?;
                if row.len() != child.len() {
                    return Err(Error::invalid("flip mask row length mismatch"));
                }
                Ok(child
                    .iter()
                    .zip(row)
                    .map(|(&g, &m)| if m != 0 { 1 - g } else { g })
                    .collect())
            } else {
                Ok(bitflip_mutation(&child, child_rate(cfg, ovr, i)?, rng))
            }
        })
        .collect();
    let repaired: Vec<Genome> = mutated?
        .into_iter()
        .map(|c| Genome::Binary(repair_knapsack(&c, inst, rng)))
        .collect();
    let fitness: Result<Vec<f64>> = repaired.iter().map(|g| evaluate_genome(g, problem)).collect();
    Ok(Population::new(repaired, fitness?, pop.generation))
}

/// TSP offspring from precomputed parent pairs: one child per pair via the
/// chosen crossover operator, then inversion mutation.
pub fn tsp_offspring(
    pop: &Population,
    problem: &ProblemInstance,
    cfg: &EvolutionConfig,
    pairs: &[(usize, usize)],
    ovr: &StageOverrides,
    rng: &mut impl Rng,
) -> Result<Population> {
    problem.as_tsp()?;
    let mut children = Vec::with_capacity(pairs.len());
    for (i, &(a, b)) in pairs.iter().enumerate() {
        let p1 = pop.genomes[a].as_perm()?;
        let p2 = pop.genomes[b].as_perm()?;
        let child = if rng.random::<f64>() < cfg.crossover_rate {
            let op = match (ovr.operator, cfg.crossover_operator) {
                (Some(op), _) => op,
                (None, OperatorChoice::Fixed(op)) => op,
                (None, OperatorChoice::UniformRandom) => {
                    ALL_OPERATORS[rng.random_range(0..ALL_OPERATORS.len())]
                }
            };
            tsp_crossover(op, p1, p2, rng)?
        } else {
            p1.clone()
        };
        let mutated = inversion_mutation(&child, child_rate(cfg, ovr, i)?, rng);
        children.push(Genome::Perm(mutated));
    }
    let fitness: Result<Vec<f64>> = children.iter().map(|g| evaluate_genome(g, problem)).collect();
    Ok(Population::new(children, fitness?, pop.generation))
}

/// Tournament pairs for the TSP pipeline: one pair per child, so twice the
/// tournaments of the knapsack pipeline for the same population size.
pub fn tsp_pairs(
    pop: &Population,
    ovr: &StageOverrides,
    rng: &mut impl Rng,
) -> Result<Vec<(usize, usize)>> {
    let shaped = shaped_fitness(pop, ovr)?;
    let candidates = parent_candidates(pop, ovr);
    tournament_select_restricted(&shaped, &candidates, pop.len(), rng)
}

/// Continuous offspring: truncation parent selection (or a controller's
/// candidate set), then per child a uniformly drawn parent mutated by
/// one-step self-adaptation or by controller-supplied step multipliers.
fn continuous_offspring(
    pop: &Population,
    problem: &ProblemInstance,
    cfg: &EvolutionConfig,
    ovr: &StageOverrides,
    rng: &mut impl Rng,
) -> Result<Population> {
    problem.as_continuous()?;
    let parents: Vec<usize> = match &ovr.parent_candidates {
        Some(c) => c.clone(),
        None => {
            let shaped = shaped_fitness(pop, ovr)?;
            let shaped_pop = Population::new(pop.genomes.clone(), shaped, pop.generation);
            truncation_select_parents(&shaped_pop, cfg.parent_percentage)?
        }
    };
    if parents.is_empty() {
        return Err(Error::DegenerateSelection);
    }

    // apply individual- or component-level step multipliers to a working
    // copy of the population's step-sizes before parents reproduce
    let mut steps: Vec<StepSize> = Vec::with_capacity(pop.len());
    for (i, g) in pop.genomes.iter().enumerate() {
        let base = g.as_real()?.step.clone();
        let step = if let Some(mults) = &ovr.step_multiplier_per_individual {
            match base {
                StepSize::Scalar(s) => StepSize::Scalar(s * mults[i]),
                StepSize::PerGene(_) => {
                    return Err(Error::invalid(
                        "per-individual multiplier on per-gene step state",
                    ))
                }
            }
        } else if let Some(mults) = &ovr.step_multiplier_per_gene {
            match base {
                StepSize::PerGene(v) => StepSize::PerGene(
                    v.iter().zip(&mults[i]).map(|(s, m)| s * m).collect(),
                ),
                StepSize::Scalar(_) => {
                    return Err(Error::invalid(
                        "per-gene multiplier needs per-gene step state",
                    ))
                }
            }
        } else {
            base
        };
        steps.push(step);
    }
    let direct_steps =
        ovr.step_multiplier_per_individual.is_some() || ovr.step_multiplier_per_gene.is_some();

    let mut children = Vec::with_capacity(pop.len());
    for _ in 0..pop.len() {
        let pick = parents[rng.random_range(0..parents.len())];
        let parent = pop.genomes[pick].as_real()?;
        let child = if direct_steps {
            // the controller already set the step-sizes; draw gene
            // increments from them directly
            let step = steps[pick].clone();
            let deltas: Vec<f64> = (0..parent.x.len())
                .map(|g| {
                    let z: f64 = StandardNormal.sample(rng);
                    z * step.at(g)
                })
                .collect();
            perturb_real(&parent.x, step, &deltas, cfg, rng)
        } else {
            let tau = if let Some(taus) = &ovr.strategy_param_per_individual {
                taus[pick]
            } else if let Some(tau) = ovr.strategy_param {
                tau
            } else {
                cfg.strategy_parameter
            };
            let base = match &steps[pick] {
                StepSize::Scalar(s) => *s,
                StepSize::PerGene(_) => {
                    return Err(Error::invalid(
                        "self-adaptive mutation needs scalar step state",
                    ))
                }
            };
            let new_step = (base * step_size_multiplier(tau, rng)).max(cfg.min_step_size);
            let deltas: Vec<f64> = (0..parent.x.len())
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    z * new_step
                })
                .collect();
            perturb_real(&parent.x, StepSize::Scalar(new_step), &deltas, cfg, rng)
        };
        children.push(Genome::Real(child));
    }
    let genomes: Vec<Genome> = children;
    let fitness: Result<Vec<f64>> = genomes.iter().map(|g| evaluate_genome(g, problem)).collect();
    Ok(Population::new(genomes, fitness?, pop.generation))
}

/// Offspring for any problem class. TSP callers that need the pairs for
/// state encoding should call [`tsp_pairs`] and [`tsp_offspring`] directly.
pub fn make_offspring(
    pop: &Population,
    problem: &ProblemInstance,
    cfg: &EvolutionConfig,
    ovr: &StageOverrides,
    rng: &mut impl Rng,
) -> Result<Population> {
    match problem.class() {
        ProblemClass::Knapsack => knapsack_offspring(pop, problem, cfg, ovr, rng),
        ProblemClass::Tsp => {
            let pairs = tsp_pairs(pop, ovr, rng)?;
            tsp_offspring(pop, problem, cfg, &pairs, ovr, rng)
        }
        ProblemClass::Continuous => continuous_offspring(pop, problem, cfg, ovr, rng),
    }
}

/// Elitism survivor selection, advancing the generation counter.
pub fn survivors(
    parents: &Population,
    offspring: &Population,
    cfg: &EvolutionConfig,
) -> Result<Population> {
    elitism_survivor_selection(parents, offspring, cfg.elite_size)
}

/// One baseline generation: offspring followed by elitism.
pub fn run_baseline_generation(
    pop: &Population,
    problem: &ProblemInstance,
    cfg: &EvolutionConfig,
    rng: &mut impl Rng,
) -> Result<Population> {
    let ovr = StageOverrides::default();
    let offspring = make_offspring(pop, problem, cfg, &ovr, rng)?;
    survivors(pop, &offspring, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{
        generate_knapsack_instance, generate_tsp_instance, ObjectiveFunction, ObjectiveId,
    };
    use crate::rng::{self, ctx};

    fn knapsack_problem(seed: u64) -> ProblemInstance {
        let mut r = rng::stream(seed, &[ctx::INSTANCE]);
        ProblemInstance::Knapsack(generate_knapsack_instance(30, 3.0, seed, &mut r).unwrap())
    }

    fn tsp_problem(seed: u64) -> ProblemInstance {
        let mut r = rng::stream(seed, &[ctx::INSTANCE]);
        ProblemInstance::Tsp(generate_tsp_instance(12, seed, &mut r).unwrap())
    }

    fn continuous_problem(id: ObjectiveId) -> ProblemInstance {
        ProblemInstance::Continuous(ObjectiveFunction::new(id))
    }

    #[test]
    fn initial_populations_are_valid() {
        let mut r = rng::stream(50, &[ctx::INIT]);
        let cfgk = EvolutionConfig::defaults_for(ProblemClass::Knapsack);
        let pk = init_population(&knapsack_problem(1), &cfgk, false, &mut r).unwrap();
        assert_eq!(pk.len(), 10);
        let cfgt = EvolutionConfig::defaults_for(ProblemClass::Tsp);
        let pt = init_population(&tsp_problem(2), &cfgt, false, &mut r).unwrap();
        assert_eq!(pt.len(), 10);
        let cfgc = EvolutionConfig::defaults_for(ProblemClass::Continuous);
        let pc = init_population(&continuous_problem(ObjectiveId::Sphere), &cfgc, false, &mut r)
            .unwrap();
        assert!(pc.fitness.iter().all(|&f| f > 0.0));
    }

    #[test]
    fn elite_one_keeps_best_fitness_monotone_everywhere() {
        let mut r = rng::stream(51, &[ctx::EVAL]);
        let problems = [
            knapsack_problem(3),
            tsp_problem(4),
            continuous_problem(ObjectiveId::Rastrigin),
        ];
        for problem in &problems {
            let mut cfg = EvolutionConfig::defaults_for(problem.class());
            cfg.elite_size = 1;
            let mut pop = init_population(problem, &cfg, false, &mut r).unwrap();
            let mut best = pop.best_fitness();
            for _ in 0..100 {
                pop = run_baseline_generation(&pop, problem, &cfg, &mut r).unwrap();
                assert!(pop.best_fitness() >= best, "{:?}", problem.class());
                assert_eq!(pop.len(), cfg.population_size);
                best = pop.best_fitness();
            }
        }
    }

    #[test]
    fn knapsack_pipeline_is_fixed_point_without_variation() {
        let mut r = rng::stream(52, &[ctx::EVAL]);
        let problem = knapsack_problem(5);
        let mut cfg = EvolutionConfig::defaults_for(ProblemClass::Knapsack);
        cfg.mutation_rate = 0.0;
        cfg.crossover_rate = 0.0;
        cfg.elite_size = cfg.population_size;
        let pop = init_population(&problem, &cfg, false, &mut r).unwrap();
        let next = run_baseline_generation(&pop, &problem, &cfg, &mut r).unwrap();
        let mut original: Vec<&Genome> = pop.genomes.iter().collect();
        let mut survived: Vec<&Genome> = next.genomes.iter().collect();
        original.sort_by_key(|g| format!("{g:?}"));
        survived.sort_by_key(|g| format!("{g:?}"));
        assert_eq!(original, survived);
    }

    #[test]
    fn knapsack_populations_stay_feasible() {
        let mut r = rng::stream(53, &[ctx::EVAL]);
        let problem = knapsack_problem(6);
        let inst = problem.as_knapsack().unwrap();
        let cfg = EvolutionConfig::defaults_for(ProblemClass::Knapsack);
        let mut pop = init_population(&problem, &cfg, false, &mut r).unwrap();
        for _ in 0..50 {
            pop = run_baseline_generation(&pop, &problem, &cfg, &mut r).unwrap();
            for g in &pop.genomes {
                assert!(inst.is_feasible(g.as_binary().unwrap()));
            }
        }
    }

    #[test]
    fn fitness_cache_is_consistent_with_reevaluation() {
        let mut r = rng::stream(54, &[ctx::EVAL]);
        for problem in [
            knapsack_problem(7),
            tsp_problem(8),
            continuous_problem(ObjectiveId::Himmelblau),
        ] {
            let cfg = EvolutionConfig::defaults_for(problem.class());
            let mut pop = init_population(&problem, &cfg, false, &mut r).unwrap();
            for _ in 0..10 {
                pop = run_baseline_generation(&pop, &problem, &cfg, &mut r).unwrap();
            }
            for (g, &f) in pop.genomes.iter().zip(&pop.fitness) {
                assert_eq!(evaluate_genome(g, &problem).unwrap(), f);
            }
        }
    }

    #[test]
    fn runs_are_bit_reproducible() {
        let problem = tsp_problem(9);
        let cfg = EvolutionConfig::defaults_for(ProblemClass::Tsp);
        let run = |seed: u64| {
            let mut r = rng::stream(seed, &[ctx::EVAL, 1]);
            let mut pop = init_population(&problem, &cfg, false, &mut r).unwrap();
            for _ in 0..30 {
                pop = run_baseline_generation(&pop, &problem, &cfg, &mut r).unwrap();
            }
            pop
        };
        assert_eq!(run(99), run(99));
    }

    /// Pilot-calibrated oracle for the continuous baseline on the sphere
    /// function: the median best objective value over 100 seeded runs was
    /// recorded once and must not regress. The runs are fully seeded, so the
    /// observed value is deterministic.
    #[test]
    fn continuous_baseline_sphere_median_pilot() {
        let problem = continuous_problem(ObjectiveId::Sphere);
        let cfg = EvolutionConfig::defaults_for(ProblemClass::Continuous);
        let mut finals = Vec::new();
        for run in 0..100u64 {
            let mut r = rng::stream(1234, &[ctx::EVAL, run]);
            let mut pop = init_population(&problem, &cfg, false, &mut r).unwrap();
            for _ in 0..100 {
                pop = run_baseline_generation(&pop, &problem, &cfg, &mut r).unwrap();
            }
            let best_g = pop
                .genomes
                .iter()
                .map(|g| function_value(g, &problem).unwrap())
                .fold(f64::INFINITY, f64::min);
            finals.push(best_g);
        }
        finals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = 0.5 * (finals[49] + finals[50]);
        // recorded from the calibration pilot (seeded, deterministic)
        let pilot = 5.971860190846954e-16;
        assert!(
            median <= pilot * (1.0 + 1e-9),
            "sphere median regressed: {median:e} > {pilot:e}"
        );
    }
}
