//! Selection, crossover, and mutation operators.
//!
//! Tie-breaking is deterministic (lower index wins) everywhere except inside
//! tournaments, where fitness ties are resolved by a fair coin.

use super::{EvolutionConfig, Population, RealGenome, StepSize};
use crate::error::{Error, Result};
use crate::problems::{DOMAIN_HI, DOMAIN_LO};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// The seven TSP crossover operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CrossoverOp {
    OnePoint,
    TwoPoint,
    LinearOrder,
    Cycle,
    PositionBased,
    OrderBased,
    PartiallyMapped,
}

pub const ALL_OPERATORS: [CrossoverOp; 7] = [
    CrossoverOp::OnePoint,
    CrossoverOp::TwoPoint,
    CrossoverOp::LinearOrder,
    CrossoverOp::Cycle,
    CrossoverOp::PositionBased,
    CrossoverOp::OrderBased,
    CrossoverOp::PartiallyMapped,
];

impl CrossoverOp {
    pub fn as_str(&self) -> &'static str {
        match self {
            CrossoverOp::OnePoint => "one-point",
            CrossoverOp::TwoPoint => "two-point",
            CrossoverOp::LinearOrder => "linear-order",
            CrossoverOp::Cycle => "cycle",
            CrossoverOp::PositionBased => "position-based",
            CrossoverOp::OrderBased => "order-based",
            CrossoverOp::PartiallyMapped => "partially-mapped",
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        ALL_OPERATORS
            .get(i)
            .copied()
            .ok_or_else(|| Error::invalid(format!("crossover operator index {i} out of range")))
    }
}

impl std::str::FromStr for CrossoverOp {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ALL_OPERATORS
            .iter()
            .find(|op| op.as_str() == s)
            .copied()
            .ok_or_else(|| Error::parse(format!("unknown crossover operator `{s}`")))
    }
}

/// One size-2 tournament over `pool`: two distinct entrants drawn uniformly,
/// the fitter index wins, ties decided by a fair coin. A single-member pool
/// wins by default.
fn tournament(fitness: &[f64], pool: &[usize], rng: &mut impl Rng) -> usize {
    debug_assert!(!pool.is_empty());
    if pool.len() == 1 {
        return pool[0];
    }
    let i = rng.random_range(0..pool.len());
    let mut j = rng.random_range(0..pool.len() - 1);
    if j >= i {
        j += 1;
    }
    let (a, b) = (pool[i], pool[j]);
    if fitness[a] > fitness[b] {
        a
    } else if fitness[b] > fitness[a] {
        b
    } else if rng.random::<bool>() {
        a
    } else {
        b
    }
}

/// Parent pairs by binary tournament selection.
///
/// Each pair runs two tournaments; the first winner sits out the second
/// tournament of its own pair but stays eligible for all later pairs.
pub fn tournament_select(
    pop: &Population,
    pair_count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(usize, usize)>> {
    let all: Vec<usize> = (0..pop.len()).collect();
    tournament_select_restricted(&pop.fitness, &all, pair_count, rng)
}

/// Tournament pairing over a candidate subset (used by learned parent
/// pre-selection). With a single candidate both parents of every pair are
/// that candidate.
pub fn tournament_select_restricted(
    fitness: &[f64],
    candidates: &[usize],
    pair_count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(usize, usize)>> {
    if fitness.len() < 2 {
        return Err(Error::invalid("tournament selection needs population size >= 2"));
    }
    if candidates.is_empty() {
        return Err(Error::DegenerateSelection);
    }
    let mut pairs = Vec::with_capacity(pair_count);
    for _ in 0..pair_count {
        let first = tournament(fitness, candidates, rng);
        let rest: Vec<usize> = candidates.iter().copied().filter(|&c| c != first).collect();
        let second = if rest.is_empty() {
            first
        } else {
            tournament(fitness, &rest, rng)
        };
        pairs.push((first, second));
    }
    Ok(pairs)
}

/// Uniform crossover on binary genomes: with probability
/// `1 - crossover_rate` the parents are copied; otherwise each gene goes to
/// child 1 from parent 1 with probability one half, else swapped.
pub fn uniform_crossover(
    p1: &[u8],
    p2: &[u8],
    crossover_rate: f64,
    rng: &mut impl Rng,
) -> Result<(Vec<u8>, Vec<u8>)> {
    if p1.len() != p2.len() {
        return Err(Error::invalid("crossover parents have different lengths"));
    }
    if rng.random::<f64>() >= crossover_rate {
        return Ok((p1.to_vec(), p2.to_vec()));
    }
    let mut c1 = Vec::with_capacity(p1.len());
    let mut c2 = Vec::with_capacity(p1.len());
    for i in 0..p1.len() {
        if rng.random::<bool>() {
            c1.push(p1[i]);
            c2.push(p2[i]);
        } else {
            c1.push(p2[i]);
            c2.push(p1[i]);
        }
    }
    Ok((c1, c2))
}

/// Flips each bit independently with probability `mutation_rate`.
pub fn bitflip_mutation(genome: &[u8], mutation_rate: f64, rng: &mut impl Rng) -> Vec<u8> {
    genome
        .iter()
        .map(|&b| {
            if rng.random::<f64>() < mutation_rate {
                1 - b
            } else {
                b
            }
        })
        .collect()
}

/// Single-child permutation crossover.
pub fn tsp_crossover(
    op: CrossoverOp,
    p1: &[usize],
    p2: &[usize],
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    let n = p1.len();
    if n < 2 || p2.len() != n || !is_perm(p1) || !is_perm(p2) {
        return Err(Error::invalid(
            "crossover inputs must be permutations of equal length >= 2",
        ));
    }
    let child = match op {
        CrossoverOp::OnePoint => {
            let cut = rng.random_range(1..n);
            let mut child = p1[..cut].to_vec();
            let used: Vec<bool> = mark_used(&child, n);
            child.extend(p2.iter().copied().filter(|&g| !used[g]));
            child
        }
        CrossoverOp::TwoPoint => {
            // keep p1's prefix and suffix, fill the middle from p2 in order
            let (c1, c2) = two_cuts(n, rng);
            let mut child = vec![usize::MAX; n];
            child[..c1].copy_from_slice(&p1[..c1]);
            child[c2..].copy_from_slice(&p1[c2..]);
            let mut used = vec![false; n];
            for &g in child.iter().filter(|&&g| g != usize::MAX) {
                used[g] = true;
            }
            let mut fill = p2.iter().copied().filter(|&g| !used[g]);
            for slot in child[c1..c2].iter_mut() {
                *slot = fill.next().unwrap();
            }
            child
        }
        CrossoverOp::LinearOrder => {
            // keep p1's middle segment in place, fill the rest left to right
            // from p2 in order
            let (c1, c2) = two_cuts(n, rng);
            let mut child = vec![usize::MAX; n];
            child[c1..c2].copy_from_slice(&p1[c1..c2]);
            let mut used = vec![false; n];
            for &g in &p1[c1..c2] {
                used[g] = true;
            }
            let mut fill = p2.iter().copied().filter(|&g| !used[g]);
            for slot in child.iter_mut() {
                if *slot == usize::MAX {
                    *slot = fill.next().unwrap();
                }
            }
            child
        }
        CrossoverOp::Cycle => {
            // alternating cycles: even cycles inherit from p1, odd from p2,
            // every position keeps a gene one of the parents had there
            let mut pos_in_p1 = vec![0usize; n];
            for (i, &g) in p1.iter().enumerate() {
                pos_in_p1[g] = i;
            }
            let mut child = vec![usize::MAX; n];
            let mut cycle = 0usize;
            for start in 0..n {
                if child[start] != usize::MAX {
                    continue;
                }
                let from_p1 = cycle % 2 == 0;
                let mut i = start;
                loop {
                    child[i] = if from_p1 { p1[i] } else { p2[i] };
                    i = pos_in_p1[p2[i]];
                    if i == start {
                        break;
                    }
                }
                cycle += 1;
            }
            child
        }
        CrossoverOp::PositionBased => {
            // a random set of positions keeps p1's genes, the rest comes
            // from p2 in order
            let keep: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
            let mut child = vec![usize::MAX; n];
            let mut used = vec![false; n];
            for i in 0..n {
                if keep[i] {
                    child[i] = p1[i];
                    used[p1[i]] = true;
                }
            }
            let mut fill = p2.iter().copied().filter(|&g| !used[g]);
            for slot in child.iter_mut() {
                if *slot == usize::MAX {
                    *slot = fill.next().unwrap();
                }
            }
            child
        }
        CrossoverOp::OrderBased => {
            // genes picked in p2 are reordered inside p1 to match their
            // order of appearance in p2
            let picked: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
            let mut in_set = vec![false; n];
            let mut genes_in_p2_order = Vec::new();
            for i in 0..n {
                if picked[i] {
                    in_set[p2[i]] = true;
                    genes_in_p2_order.push(p2[i]);
                }
            }
            let mut child = p1.to_vec();
            let mut fill = genes_in_p2_order.into_iter();
            for slot in child.iter_mut() {
                if in_set[*slot] {
                    *slot = fill.next().unwrap();
                }
            }
            child
        }
        CrossoverOp::PartiallyMapped => {
            let (c1, c2) = two_cuts(n, rng);
            let mut child = vec![usize::MAX; n];
            child[c1..c2].copy_from_slice(&p1[c1..c2]);
            let mut pos_in_p1 = vec![0usize; n];
            for (i, &g) in p1.iter().enumerate() {
                pos_in_p1[g] = i;
            }
            let in_segment = |g: usize| {
                let p = pos_in_p1[g];
                p >= c1 && p < c2
            };
            for i in (0..c1).chain(c2..n) {
                let mut g = p2[i];
                while in_segment(g) {
                    g = p2[pos_in_p1[g]];
                }
                child[i] = g;
            }
            child
        }
    };
    debug_assert!(is_perm(&child));
    Ok(child)
}

fn is_perm(p: &[usize]) -> bool {
    let n = p.len();
    let mut seen = vec![false; n];
    p.iter().all(|&g| {
        if g >= n || seen[g] {
            false
        } else {
            seen[g] = true;
            true
        }
    })
}

fn mark_used(prefix: &[usize], n: usize) -> Vec<bool> {
    let mut used = vec![false; n];
    for &g in prefix {
        used[g] = true;
    }
    used
}

fn two_cuts(n: usize, rng: &mut impl Rng) -> (usize, usize) {
    let a = rng.random_range(0..=n);
    let b = rng.random_range(0..=n);
    (a.min(b), a.max(b))
}

/// With probability `mutation_rate`, reverses the segment between two
/// uniformly chosen positions (inclusive).
pub fn inversion_mutation(perm: &[usize], mutation_rate: f64, rng: &mut impl Rng) -> Vec<usize> {
    let mut out = perm.to_vec();
    if out.len() > 1 && rng.random::<f64>() < mutation_rate {
        let a = rng.random_range(0..out.len());
        let b = rng.random_range(0..out.len());
        let (lo, hi) = (a.min(b), a.max(b));
        out[lo..=hi].reverse();
    }
    out
}

/// Indices of the `ceil(parent_percentage * population_size)` fittest
/// individuals, ties broken by lower index.
pub fn truncation_select_parents(pop: &Population, parent_percentage: f64) -> Result<Vec<usize>> {
    if !(parent_percentage > 0.0 && parent_percentage <= 1.0) {
        return Err(Error::invalid("parent_percentage must lie in (0, 1]"));
    }
    let k = (parent_percentage * pop.len() as f64).ceil() as usize;
    if k == 0 {
        return Err(Error::invalid("parent selection would be empty"));
    }
    Ok(ranked_indices(&pop.fitness).into_iter().take(k).collect())
}

/// Indices sorted by descending fitness, ascending index on ties.
pub fn ranked_indices(fitness: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..fitness.len()).collect();
    idx.sort_by(|&a, &b| {
        fitness[b]
            .partial_cmp(&fitness[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

/// Log-normal step-size multiplier `exp(tau * N(0, 1))`.
pub fn step_size_multiplier(tau: f64, rng: &mut impl Rng) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (tau * z).exp()
}

/// One-step self-adaptive mutation: the step-size is multiplied by a
/// log-normal sample (clamped below at `min_step_size`), then every
/// coordinate receives an independent `N(0, step)` increment. Leaving the
/// domain re-initializes the individual uniformly and resets its step-size.
pub fn self_adaptive_mutation(
    g: &RealGenome,
    tau: f64,
    cfg: &EvolutionConfig,
    rng: &mut impl Rng,
) -> Result<RealGenome> {
    if !(tau > 0.0) {
        return Err(Error::invalid("strategy parameter must be positive"));
    }
    let step = match &g.step {
        StepSize::Scalar(s) => s,
        StepSize::PerGene(_) => {
            return Err(Error::invalid(
                "self-adaptive mutation operates on scalar step-sizes",
            ))
        }
    };
    let new_step = (step * step_size_multiplier(tau, rng)).max(cfg.min_step_size);
    let deltas: Vec<f64> = g
        .x
        .iter()
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * new_step
        })
        .collect();
    Ok(perturb_real(&g.x, StepSize::Scalar(new_step), &deltas, cfg, rng))
}

/// Applies precomputed increments to a real genome, re-initializing
/// uniformly in the domain (with the step-size reset) if the mutated point
/// leaves it.
pub fn perturb_real(
    x: &[f64],
    step: StepSize,
    deltas: &[f64],
    cfg: &EvolutionConfig,
    rng: &mut impl Rng,
) -> RealGenome {
    let moved: Vec<f64> = x.iter().zip(deltas).map(|(a, d)| a + d).collect();
    let inside = moved.iter().all(|&v| (DOMAIN_LO..=DOMAIN_HI).contains(&v));
    if inside {
        RealGenome { x: moved, step }
    } else {
        let fresh: Vec<f64> = x
            .iter()
            .map(|_| DOMAIN_LO + rng.random::<f64>() * (DOMAIN_HI - DOMAIN_LO))
            .collect();
        let reset = match step {
            StepSize::Scalar(_) => StepSize::Scalar(cfg.initial_step_size),
            StepSize::PerGene(v) => StepSize::PerGene(vec![cfg.initial_step_size; v.len()]),
        };
        RealGenome { x: fresh, step: reset }
    }
}

/// Keeps the `elite_size` fittest parents plus the fittest offspring, ties
/// to the lower index within each group.
pub fn elitism_survivor_selection(
    parents: &Population,
    offspring: &Population,
    elite_size: usize,
) -> Result<Population> {
    if parents.len() != offspring.len() {
        return Err(Error::invalid("parent and offspring populations differ in size"));
    }
    if elite_size > parents.len() {
        return Err(Error::invalid("elite_size exceeds population size"));
    }
    let mut genomes = Vec::with_capacity(parents.len());
    let mut fitness = Vec::with_capacity(parents.len());
    for &i in ranked_indices(&parents.fitness).iter().take(elite_size) {
        genomes.push(parents.genomes[i].clone());
        fitness.push(parents.fitness[i]);
    }
    let keep = parents.len() - elite_size;
    for &i in ranked_indices(&offspring.fitness).iter().take(keep) {
        genomes.push(offspring.genomes[i].clone());
        fitness.push(offspring.fitness[i]);
    }
    Ok(Population::new(genomes, fitness, parents.generation + 1))
}
