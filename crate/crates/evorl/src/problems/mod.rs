//! Benchmark problem classes: 0-1 knapsack, traveling salesman (maximum
//! weight Hamiltonian cycle), and normalized two-dimensional objective
//! functions. All fitness functions are maximized and strictly positive on
//! the inputs the evolutionary pipelines produce.

mod io;
mod knapsack;
mod objective;
mod tsp;

pub use io::{load_instance, parse_instance, save_instance};
pub use knapsack::{generate_knapsack_instance, knapsack_fitness, repair_knapsack, KnapsackInstance};
pub use objective::{continuous_fitness, eval_objective, ObjectiveFunction, ObjectiveId, DOMAIN_LO, DOMAIN_HI};
pub use tsp::{generate_tsp_instance, tsp_fitness, TspInstance};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemClass {
    Knapsack,
    Tsp,
    Continuous,
}

impl ProblemClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemClass::Knapsack => "knapsack",
            ProblemClass::Tsp => "tsp",
            ProblemClass::Continuous => "continuous",
        }
    }
}

impl std::str::FromStr for ProblemClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knapsack" => Ok(ProblemClass::Knapsack),
            "tsp" => Ok(ProblemClass::Tsp),
            "continuous" => Ok(ProblemClass::Continuous),
            other => Err(Error::parse(format!("unknown problem class `{other}`"))),
        }
    }
}

/// One optimization task: the payload the evolutionary algorithm runs on.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemInstance {
    Knapsack(KnapsackInstance),
    Tsp(TspInstance),
    Continuous(ObjectiveFunction),
}

impl ProblemInstance {
    pub fn class(&self) -> ProblemClass {
        match self {
            ProblemInstance::Knapsack(_) => ProblemClass::Knapsack,
            ProblemInstance::Tsp(_) => ProblemClass::Tsp,
            ProblemInstance::Continuous(_) => ProblemClass::Continuous,
        }
    }

    /// Genome length for this instance.
    pub fn genome_size(&self) -> usize {
        match self {
            ProblemInstance::Knapsack(k) => k.items.len(),
            ProblemInstance::Tsp(t) => t.n,
            ProblemInstance::Continuous(_) => 2,
        }
    }

    pub fn as_knapsack(&self) -> Result<&KnapsackInstance> {
        match self {
            ProblemInstance::Knapsack(k) => Ok(k),
            _ => Err(Error::invalid("expected a knapsack instance")),
        }
    }

    pub fn as_tsp(&self) -> Result<&TspInstance> {
        match self {
            ProblemInstance::Tsp(t) => Ok(t),
            _ => Err(Error::invalid("expected a TSP instance")),
        }
    }

    pub fn as_continuous(&self) -> Result<&ObjectiveFunction> {
        match self {
            ProblemInstance::Continuous(f) => Ok(f),
            _ => Err(Error::invalid("expected a continuous objective")),
        }
    }
}
