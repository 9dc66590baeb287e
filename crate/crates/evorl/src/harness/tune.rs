//! Grid search over static evolution parameters for the baseline
//! algorithms.

use super::{evaluate, ExperimentConfig};
use crate::error::{Error, Result};
use crate::evo::{CrossoverOp, EvolutionConfig, OperatorChoice, ALL_OPERATORS};
use crate::problems::{ProblemClass, ProblemInstance};

/// A tunable evolution parameter. Operator and elite-size grids carry their
/// values as indices/counts in f64 form, so one grid representation covers
/// both continuous and discrete parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridParam {
    MutationRate,
    CrossoverRate,
    EliteSize,
    ParentPercentage,
    StrategyParameter,
    CrossoverOperator,
}

impl GridParam {
    pub fn as_str(&self) -> &'static str {
        match self {
            GridParam::MutationRate => "mutation_rate",
            GridParam::CrossoverRate => "crossover_rate",
            GridParam::EliteSize => "elite_size",
            GridParam::ParentPercentage => "parent_percentage",
            GridParam::StrategyParameter => "strategy_parameter",
            GridParam::CrossoverOperator => "crossover_operator",
        }
    }
}

impl std::str::FromStr for GridParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mutation_rate" => GridParam::MutationRate,
            "crossover_rate" => GridParam::CrossoverRate,
            "elite_size" => GridParam::EliteSize,
            "parent_percentage" => GridParam::ParentPercentage,
            "strategy_parameter" => GridParam::StrategyParameter,
            "crossover_operator" => GridParam::CrossoverOperator,
            other => return Err(Error::parse(format!("unknown grid parameter `{other}`"))),
        })
    }
}

/// One evaluated grid point: the assigned values (in grid order) and the
/// terminal metric it reached.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub assignment: Vec<(GridParam, f64)>,
    pub terminal: f64,
}

fn inclusive_range(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let v = start + step * k as f64;
        if v > stop + step * 1e-9 {
            break;
        }
        out.push(v);
        k += 1;
    }
    out
}

/// Default search grids: the mutation rate over [0.005, 0.013] with step
/// 0.0001 for the combinatorial classes, the strategy parameter over
/// (0, 1] at two decimals for continuous optimization, and every discrete
/// value for the exhaustive parameters.
pub fn default_grid(class: ProblemClass, population_size: usize) -> Vec<(GridParam, Vec<f64>)> {
    match class {
        ProblemClass::Knapsack => vec![(
            GridParam::MutationRate,
            inclusive_range(0.005, 0.013, 0.0001),
        )],
        ProblemClass::Tsp => vec![(
            GridParam::CrossoverOperator,
            (0..ALL_OPERATORS.len()).map(|i| i as f64).collect(),
        )],
        ProblemClass::Continuous => {
            let mut v = inclusive_range(0.01, 1.0, 0.01);
            v.truncate(100);
            let _ = population_size;
            vec![(GridParam::StrategyParameter, v)]
        }
    }
}

/// All discrete values for an exhaustive parameter.
pub fn exhaustive_values(param: GridParam, population_size: usize) -> Result<Vec<f64>> {
    match param {
        GridParam::EliteSize => Ok((0..=population_size).map(|e| e as f64).collect()),
        GridParam::CrossoverOperator => {
            Ok((0..ALL_OPERATORS.len()).map(|i| i as f64).collect())
        }
        GridParam::ParentPercentage => Ok((1..=population_size)
            .map(|k| k as f64 / population_size as f64)
            .collect()),
        _ => Err(Error::invalid(format!(
            "parameter `{}` has no exhaustive value set",
            param.as_str()
        ))),
    }
}

fn apply_assignment(cfg: &mut EvolutionConfig, assignment: &[(GridParam, f64)]) -> Result<()> {
    for &(param, value) in assignment {
        match param {
            GridParam::MutationRate => cfg.mutation_rate = value,
            GridParam::CrossoverRate => cfg.crossover_rate = value,
            GridParam::EliteSize => cfg.elite_size = value as usize,
            GridParam::ParentPercentage => cfg.parent_percentage = value,
            GridParam::StrategyParameter => cfg.strategy_parameter = value,
            GridParam::CrossoverOperator => {
                cfg.crossover_operator = OperatorChoice::Fixed(CrossoverOp::from_index(
                    value as usize,
                )?)
            }
        }
    }
    Ok(())
}

/// Evaluates every point of the cartesian grid over the instance set and
/// returns the best configuration (highest terminal MBF, or lowest terminal
/// MBFv for continuous problems; ties go to the first-enumerated point)
/// together with the full grid table.
pub fn tune_baseline(
    instances: &[ProblemInstance],
    cfg: &ExperimentConfig,
    grid: &[(GridParam, Vec<f64>)],
    runs: usize,
    seed: u64,
) -> Result<(EvolutionConfig, Vec<GridPoint>)> {
    if grid.is_empty() || grid.iter().any(|(_, v)| v.is_empty()) {
        return Err(Error::invalid("tuning grid must be non-empty"));
    }
    let continuous = cfg.problem == ProblemClass::Continuous;
    let total: usize = grid.iter().map(|(_, v)| v.len()).product();
    let mut table = Vec::with_capacity(total);
    let mut best: Option<(usize, f64)> = None;
    for flat in 0..total {
        // mixed-radix decode, first dimension slowest
        let mut rem = flat;
        let mut assignment = Vec::with_capacity(grid.len());
        for (param, values) in grid.iter().rev() {
            let idx = rem % values.len();
            rem /= values.len();
            assignment.push((*param, values[idx]));
        }
        assignment.reverse();
        let mut evo = cfg.evo.clone();
        apply_assignment(&mut evo, &assignment)?;
        evo.validate(cfg.problem)?;
        let point_cfg = ExperimentConfig { evo, ..cfg.clone() };
        let metrics = evaluate(None, None, instances, &point_cfg, runs, false, seed)?;
        let better = match best {
            None => true,
            Some((_, t)) => {
                if continuous {
                    metrics.terminal < t
                } else {
                    metrics.terminal > t
                }
            }
        };
        if better {
            best = Some((flat, metrics.terminal));
        }
        table.push(GridPoint { assignment, terminal: metrics.terminal });
    }
    let (best_idx, _) = best.unwrap();
    let mut evo = cfg.evo.clone();
    apply_assignment(&mut evo, &table[best_idx].assignment)?;
    Ok((evo, table))
}

/// Writes the grid table as CSV: one column per parameter plus the terminal
/// metric.
pub fn write_grid_csv(table: &[GridPoint], continuous: bool, path: &std::path::Path) -> Result<()> {
    use std::io::Write;
    let mut out = String::new();
    if let Some(first) = table.first() {
        let mut header: Vec<&str> = first.assignment.iter().map(|(p, _)| p.as_str()).collect();
        header.push(if continuous { "tmbfv" } else { "tmbf" });
        out.push_str(&header.join(","));
        out.push('\n');
    }
    for point in table {
        let mut row: Vec<String> = point
            .assignment
            .iter()
            .map(|(_, v)| v.to_string())
            .collect();
        row.push(point.terminal.to_string());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}
