//! Traveling salesman instances on fully connected, weighted, undirected
//! graphs. The objective is the maximum-weight Hamiltonian cycle, so fitness
//! is the full cycle weight including the closing edge.

use crate::error::{Error, Result};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TspInstance {
    pub n: usize,
    /// Symmetric `n x n` edge-weight matrix with zero diagonal, row-major.
    pub weights: Vec<f64>,
    pub seed: u64,
}

impl TspInstance {
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::invalid("TSP needs at least 3 nodes"));
        }
        if self.weights.len() != self.n * self.n {
            return Err(Error::invalid("TSP weight matrix has wrong size"));
        }
        for i in 0..self.n {
            if self.weight(i, i) != 0.0 {
                return Err(Error::invalid("TSP diagonal must be zero"));
            }
            for j in 0..self.n {
                let w = self.weight(i, j);
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::invalid("TSP weights must be finite and non-negative"));
                }
                if w != self.weight(j, i) {
                    return Err(Error::invalid("TSP weight matrix must be symmetric"));
                }
            }
        }
        Ok(())
    }
}

/// Generates an instance with off-diagonal weights i.i.d. uniform on [0, 1],
/// drawn in row-major upper-triangle order and mirrored.
pub fn generate_tsp_instance(n: usize, seed: u64, rng: &mut impl Rng) -> Result<TspInstance> {
    if n < 3 {
        return Err(Error::invalid("TSP node count must be at least 3"));
    }
    let mut weights = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let w: f64 = rng.random();
            weights[i * n + j] = w;
            weights[j * n + i] = w;
        }
    }
    Ok(TspInstance { n, weights, seed })
}

pub fn is_permutation(perm: &[usize], n: usize) -> bool {
    if perm.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return false;
        }
        seen[p] = true;
    }
    true
}

/// Full cycle weight of the tour, including the edge back to the start.
pub fn tsp_fitness(perm: &[usize], inst: &TspInstance) -> Result<f64> {
    if !is_permutation(perm, inst.n) {
        return Err(Error::invalid("tour is not a permutation of 0..n"));
    }
    let mut total = 0.0;
    for i in 0..perm.len() {
        let a = perm[i];
        let b = perm[(i + 1) % perm.len()];
        total += inst.weight(a, b);
    }
    Ok(total)
}
