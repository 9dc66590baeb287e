//! Genome representations, variation and selection operators, and the three
//! baseline evolutionary algorithms, structured so an adaptation controller
//! can override any single stage of a generation.

mod baseline;
mod ops;

pub use baseline::{
    evaluate_genome, function_value, init_population, make_offspring, run_baseline_generation,
    survivors, tsp_offspring, tsp_pairs, StageOverrides,
};
pub use ops::{
    bitflip_mutation, elitism_survivor_selection, inversion_mutation, perturb_real, ranked_indices,
    self_adaptive_mutation, step_size_multiplier, tournament_select, tournament_select_restricted,
    truncation_select_parents, tsp_crossover, uniform_crossover, CrossoverOp, ALL_OPERATORS,
};

use crate::error::{Error, Result};
use crate::problems::ProblemClass;

/// Per-individual step-size state for the continuous genome. The baseline
/// algorithm uses one scalar; component-level step-size control attaches one
/// step-size per gene.
#[derive(Debug, Clone, PartialEq)]
pub enum StepSize {
    Scalar(f64),
    PerGene(Vec<f64>),
}

impl StepSize {
    pub fn at(&self, gene: usize) -> f64 {
        match self {
            StepSize::Scalar(s) => *s,
            StepSize::PerGene(v) => v[gene],
        }
    }
}

/// Real-valued genome with self-adaptation state.
#[derive(Debug, Clone, PartialEq)]
pub struct RealGenome {
    pub x: Vec<f64>,
    pub step: StepSize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Genome {
    Binary(Vec<u8>),
    Perm(Vec<usize>),
    Real(RealGenome),
}

impl Genome {
    pub fn as_binary(&self) -> Result<&Vec<u8>> {
        match self {
            Genome::Binary(b) => Ok(b),
            _ => Err(Error::invalid("expected a binary genome")),
        }
    }

    pub fn as_perm(&self) -> Result<&Vec<usize>> {
        match self {
            Genome::Perm(p) => Ok(p),
            _ => Err(Error::invalid("expected a permutation genome")),
        }
    }

    pub fn as_real(&self) -> Result<&RealGenome> {
        match self {
            Genome::Real(r) => Ok(r),
            _ => Err(Error::invalid("expected a real genome")),
        }
    }
}

/// An evolving population with cached fitness values.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub genomes: Vec<Genome>,
    pub fitness: Vec<f64>,
    pub generation: usize,
}

impl Population {
    pub fn new(genomes: Vec<Genome>, fitness: Vec<f64>, generation: usize) -> Self {
        assert_eq!(genomes.len(), fitness.len());
        Population { genomes, fitness, generation }
    }

    pub fn len(&self) -> usize {
        self.genomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genomes.is_empty()
    }

    pub fn best_fitness(&self) -> f64 {
        self.fitness.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean_fitness(&self) -> f64 {
        self.fitness.iter().sum::<f64>() / self.fitness.len() as f64
    }
}

/// How the TSP baseline chooses its crossover operator when no controller
/// overrides it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorChoice {
    Fixed(CrossoverOp),
    UniformRandom,
}

/// Evolution parameters. Defaults follow the benchmarked per-class values;
/// the episode length is the number of generations one run executes.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub elite_size: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub parent_percentage: f64,
    pub strategy_parameter: f64,
    pub initial_step_size: f64,
    pub min_step_size: f64,
    pub episode_length: usize,
    pub crossover_operator: OperatorChoice,
}

impl EvolutionConfig {
    pub fn defaults_for(class: ProblemClass) -> Self {
        let base = EvolutionConfig {
            population_size: 10,
            elite_size: 0,
            crossover_rate: 0.9,
            mutation_rate: 0.01,
            parent_percentage: 0.2,
            strategy_parameter: 0.5,
            initial_step_size: 0.1,
            min_step_size: 1e-8,
            episode_length: 100,
            crossover_operator: OperatorChoice::Fixed(CrossoverOp::TwoPoint),
        };
        match class {
            ProblemClass::Knapsack => base,
            ProblemClass::Tsp => EvolutionConfig {
                elite_size: 1,
                crossover_rate: 1.0,
                ..base
            },
            ProblemClass::Continuous => base,
        }
    }

    pub fn validate(&self, class: ProblemClass) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::invalid("population_size must be at least 2"));
        }
        if class == ProblemClass::Knapsack && self.population_size % 2 != 0 {
            return Err(Error::invalid(
                "knapsack needs an even population_size (pairs produce two children)",
            ));
        }
        if self.elite_size > self.population_size {
            return Err(Error::invalid("elite_size cannot exceed population_size"));
        }
        for (name, v) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1]")));
            }
        }
        if !(self.parent_percentage > 0.0 && self.parent_percentage <= 1.0) {
            return Err(Error::invalid("parent_percentage must lie in (0, 1]"));
        }
        if !(self.strategy_parameter > 0.0) {
            return Err(Error::invalid("strategy_parameter must be positive"));
        }
        if !(self.initial_step_size > 0.0) || !(self.min_step_size > 0.0) {
            return Err(Error::invalid("step sizes must be positive"));
        }
        if self.episode_length < 1 {
            return Err(Error::invalid("episode_length must be at least 1"));
        }
        Ok(())
    }
}
