//! 0-1 knapsack instances: generation, fitness, and feasibility repair.
//!
//! A candidate selection is feasible when its total weight is *strictly*
//! below the weight limit. Fitness is the total value of the selected items;
//! callers must repair infeasible genomes before evaluating.

use crate::error::{Error, Result};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct KnapsackInstance {
    /// `(weight, value)` per item, both non-negative and finite.
    pub items: Vec<(f64, f64)>,
    /// Strict upper bound on the total selected weight.
    pub weight_limit: f64,
    /// Seed recorded at generation time, for provenance in instance files.
    pub seed: u64,
}

impl KnapsackInstance {
    pub fn validate(&self) -> Result<()> {
        if self.items.is_empty() {
            return Err(Error::invalid("knapsack instance needs at least one item"));
        }
        if !(self.weight_limit > 0.0) {
            return Err(Error::invalid("knapsack weight limit must be positive"));
        }
        for (i, &(w, v)) in self.items.iter().enumerate() {
            if !w.is_finite() || !v.is_finite() || w < 0.0 || v < 0.0 {
                return Err(Error::invalid(format!(
                    "knapsack item {i} has invalid weight/value ({w}, {v})"
                )));
            }
        }
        Ok(())
    }

    pub fn total_weight(&self, genome: &[u8]) -> f64 {
        genome
            .iter()
            .zip(&self.items)
            .filter(|(&g, _)| g != 0)
            .map(|(_, &(w, _))| w)
            .sum()
    }

    pub fn is_feasible(&self, genome: &[u8]) -> bool {
        self.total_weight(genome) < self.weight_limit
    }
}

/// Generates an instance with `n` items, weights and values i.i.d. uniform
/// on [0, 1], and the given weight limit.
pub fn generate_knapsack_instance(
    n: usize,
    w_max: f64,
    seed: u64,
    rng: &mut impl Rng,
) -> Result<KnapsackInstance> {
    if n == 0 {
        return Err(Error::invalid("knapsack item count must be at least 1"));
    }
    if !(w_max > 0.0) {
        return Err(Error::invalid("knapsack weight limit must be positive"));
    }
    let items = (0..n)
        .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
        .collect();
    Ok(KnapsackInstance {
        items,
        weight_limit: w_max,
        seed,
    })
}

/// Total value of the selected items.
///
/// The genome must already satisfy the weight constraint; violating it is a
/// contract error, not a quietly penalized state.
pub fn knapsack_fitness(genome: &[u8], inst: &KnapsackInstance) -> Result<f64> {
    if genome.len() != inst.items.len() {
        return Err(Error::invalid(format!(
            "genome length {} != item count {}",
            genome.len(),
            inst.items.len()
        )));
    }
    if !inst.is_feasible(genome) {
        return Err(Error::contract(
            "knapsack genome violates the weight constraint; repair before evaluating",
        ));
    }
    Ok(genome
        .iter()
        .zip(&inst.items)
        .filter(|(&g, _)| g != 0)
        .map(|(_, &(_, v))| v)
        .sum())
}

/// Removes selected items uniformly at random, one at a time, until the
/// weight constraint holds. Feasible inputs pass through unchanged.
pub fn repair_knapsack(genome: &[u8], inst: &KnapsackInstance, rng: &mut impl Rng) -> Vec<u8> {
    let mut out = genome.to_vec();
    let mut selected: Vec<usize> = out
        .iter()
        .enumerate()
        .filter(|(_, &g)| g != 0)
        .map(|(i, _)| i)
        .collect();
    let mut weight: f64 = selected.iter().map(|&i| inst.items[i].0).sum();
    while weight >= inst.weight_limit && !selected.is_empty() {
        let pick = rng.random_range(0..selected.len());
        let item = selected.swap_remove(pick);
        out[item] = 0;
        weight -= inst.items[item].0;
    }
    out
}
