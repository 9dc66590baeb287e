//! Population-to-tensor state encoding.
//!
//! States are `P x G x C` tensors. Population-wide scalars are replicated
//! across both trailing axes; per-individual scalars are replicated along
//! the genome axis.
//!
//! Channel legends:
//! - knapsack (C = 6): genome bit, fitness, remaining generations
//!   `(T - t) / T`, weight limit, item weight, item value;
//! - continuous (C = 4): gene value, ln(fitness), remaining generations,
//!   step-size (per-gene when the genome carries per-gene steps);
//! - TSP (C = 5 + 2N, one row per parent pair): first parent's genes, second
//!   parent's genes, both fitness values, remaining generations, then for
//!   each parent N distance channels where channel k at gene j holds the
//!   distance from the visited node to node k.

use crate::error::{Error, Result};
use crate::evo::Population;
use crate::problems::{ProblemClass, ProblemInstance};
use ndarray::prelude::*;

/// Network input: population-size x genome-size x channels.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTensor {
    pub data: Array3<f64>,
    pub class: ProblemClass,
}

impl StateTensor {
    pub fn rows(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn genome_size(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn channels(&self) -> usize {
        self.data.shape()[2]
    }
}

/// Method-specific extra context for encoding.
#[derive(Debug, Clone, Copy)]
pub enum EncodeExtra<'a> {
    None,
    /// Parent pairs for the pair-based TSP encoding.
    TspPairs(&'a [(usize, usize)]),
}

/// Encodes a population at generation `t` of an episode of length `big_t`.
pub fn encode_state(
    pop: &Population,
    problem: &ProblemInstance,
    t: usize,
    big_t: usize,
    extra: EncodeExtra,
) -> Result<StateTensor> {
    if t >= big_t {
        return Err(Error::invalid(format!(
            "generation index {t} out of range for episode length {big_t}"
        )));
    }
    let remaining = (big_t - t) as f64 / big_t as f64;
    let class = problem.class();
    match (problem, extra) {
        (ProblemInstance::Knapsack(inst), EncodeExtra::None) => {
            let p = pop.len();
            let g = inst.items.len();
            let mut data = Array3::zeros((p, g, 6));
            for (i, genome) in pop.genomes.iter().enumerate() {
                let bits = genome.as_binary()?;
                for j in 0..g {
                    data[[i, j, 0]] = bits[j] as f64;
                    data[[i, j, 1]] = pop.fitness[i];
                    data[[i, j, 2]] = remaining;
                    data[[i, j, 3]] = inst.weight_limit;
                    data[[i, j, 4]] = inst.items[j].0;
                    data[[i, j, 5]] = inst.items[j].1;
                }
            }
            Ok(StateTensor { data, class })
        }
        (ProblemInstance::Continuous(_), EncodeExtra::None) => {
            let p = pop.len();
            let g = problem.genome_size();
            let mut data = Array3::zeros((p, g, 4));
            for (i, genome) in pop.genomes.iter().enumerate() {
                let real = genome.as_real()?;
                for j in 0..g {
                    data[[i, j, 0]] = real.x[j];
                    data[[i, j, 1]] = pop.fitness[i].ln();
                    data[[i, j, 2]] = remaining;
                    data[[i, j, 3]] = real.step.at(j);
                }
            }
            Ok(StateTensor { data, class })
        }
        (ProblemInstance::Tsp(inst), EncodeExtra::TspPairs(pairs)) => {
            let n = inst.n;
            let rows = pairs.len();
            let mut data = Array3::zeros((rows, n, 5 + 2 * n));
            for (i, &(a, b)) in pairs.iter().enumerate() {
                let g1 = pop.genomes[a].as_perm()?;
                let g2 = pop.genomes[b].as_perm()?;
                for j in 0..n {
                    data[[i, j, 0]] = g1[j] as f64;
                    data[[i, j, 1]] = g2[j] as f64;
                    data[[i, j, 2]] = pop.fitness[a];
                    data[[i, j, 3]] = pop.fitness[b];
                    data[[i, j, 4]] = remaining;
                    for k in 0..n {
                        data[[i, j, 5 + k]] = inst.weight(g1[j], k);
                        data[[i, j, 5 + n + k]] = inst.weight(g2[j], k);
                    }
                }
            }
            Ok(StateTensor { data, class })
        }
        (ProblemInstance::Tsp(_), EncodeExtra::None) => {
            Err(Error::invalid("TSP encoding needs parent pairs"))
        }
        _ => Err(Error::invalid("encode extra does not match problem class")),
    }
}
