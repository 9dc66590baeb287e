//! Flat `key = value` experiment configuration files.
//!
//! UTF-8 text, one assignment per line, `#` starts a comment. The `problem`
//! key is required; `method` selects an adaptation method (omit it for
//! baseline-only work). All other keys override the per-class defaults.
//! Unknown keys are errors.

use super::tune::GridParam;
use super::ExperimentConfig;
use crate::error::{Error, Result};
use crate::evo::{CrossoverOp, OperatorChoice};
use crate::problems::ObjectiveId;
use std::path::{Path, PathBuf};

/// Parses the text into ordered `(key, value)` pairs.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::parse(format!("line {}: expected `key = value`", lineno + 1))
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn get<'a>(pairs: &'a [(String, String)], key: &str) -> Option<&'a str> {
    pairs
        .iter()
        .rev()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
}

fn parse_grid_spec(spec: &str, population_size: usize) -> Result<Vec<(GridParam, Vec<f64>)>> {
    let mut grid = Vec::new();
    for dim in spec.split(',') {
        let dim = dim.trim();
        if dim.is_empty() {
            continue;
        }
        let parts: Vec<&str> = dim.split(':').collect();
        let param: GridParam = parts[0].trim().parse()?;
        let values = match parts.len() {
            // bare parameter name: exhaustive discrete values
            1 => super::tune::exhaustive_values(param, population_size)?,
            // start:stop:step
            4 => {
                let nums: Result<Vec<f64>> = parts[1..]
                    .iter()
                    .map(|s| {
                        s.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::parse(format!("bad grid number `{s}`")))
                    })
                    .collect();
                let nums = nums?;
                let mut vals = Vec::new();
                let mut k = 0usize;
                loop {
                    let v = nums[0] + nums[2] * k as f64;
                    if v > nums[1] + nums[2] * 1e-9 {
                        break;
                    }
                    vals.push(v);
                    k += 1;
                }
                vals
            }
            _ => {
                return Err(Error::parse(format!(
                    "grid dimension `{dim}` must be `param` or `param:start:stop:step`"
                )))
            }
        };
        grid.push((param, values));
    }
    if grid.is_empty() {
        return Err(Error::parse("empty grid specification"));
    }
    Ok(grid)
}

fn parse_function_list(spec: &str) -> Result<Vec<ObjectiveId>> {
    spec.split(',')
        .map(|s| s.trim().parse::<ObjectiveId>())
        .collect()
}

/// Builds an experiment configuration from config text: class/method
/// defaults first, then every override in file order.
pub fn config_from_text(text: &str) -> Result<ExperimentConfig> {
    let pairs = parse_config_text(text)?;
    let problem = get(&pairs, "problem")
        .ok_or_else(|| Error::parse("config needs a `problem` key"))?
        .parse()?;
    let method = match get(&pairs, "method") {
        None | Some("baseline") => None,
        Some(m) => Some(m.parse()?),
    };
    let mut cfg = ExperimentConfig::defaults(problem, method)?;

    for (key, value) in &pairs {
        let v = value.as_str();
        let parse_f64 = || -> Result<f64> {
            v.parse()
                .map_err(|_| Error::parse(format!("`{key}` expects a number, got `{v}`")))
        };
        let parse_usize = || -> Result<usize> {
            v.parse()
                .map_err(|_| Error::parse(format!("`{key}` expects an integer, got `{v}`")))
        };
        let parse_bool = || -> Result<bool> {
            match v {
                "true" | "1" => Ok(true),
                "false" | "0" => Ok(false),
                _ => Err(Error::parse(format!("`{key}` expects true/false, got `{v}`"))),
            }
        };
        match key.as_str() {
            "problem" | "method" => {}
            "population_size" => cfg.evo.population_size = parse_usize()?,
            "elite_size" => cfg.evo.elite_size = parse_usize()?,
            "crossover_rate" => cfg.evo.crossover_rate = parse_f64()?,
            "mutation_rate" => cfg.evo.mutation_rate = parse_f64()?,
            "parent_percentage" => cfg.evo.parent_percentage = parse_f64()?,
            "strategy_parameter" => cfg.evo.strategy_parameter = parse_f64()?,
            "initial_step_size" => cfg.evo.initial_step_size = parse_f64()?,
            "min_step_size" => cfg.evo.min_step_size = parse_f64()?,
            "episode_length" => cfg.evo.episode_length = parse_usize()?,
            "crossover_operator" => {
                cfg.evo.crossover_operator = if v == "uniform-random" {
                    OperatorChoice::UniformRandom
                } else {
                    OperatorChoice::Fixed(v.parse::<CrossoverOp>()?)
                }
            }
            "gamma" => cfg.ppo.gamma = parse_f64()?,
            "lambda" => cfg.ppo.lambda = parse_f64()?,
            "clip_epsilon" => cfg.ppo.clip_epsilon = parse_f64()?,
            "value_loss_weight" => cfg.ppo.value_loss_weight = parse_f64()?,
            "entropy_weight" => cfg.ppo.entropy_weight = parse_f64()?,
            "reward_scale" => cfg.ppo.reward_scale = parse_f64()?,
            "learning_rate" => cfg.ppo.learning_rate = parse_f64()?,
            "minibatch_size" => cfg.ppo.minibatch_size = parse_usize()?,
            "epochs" => cfg.ppo.epochs = parse_usize()?,
            "iterations" => cfg.ppo.iterations = parse_usize()?,
            "actors" => cfg.ppo.actors = parse_usize()?,
            "normalize_advantages" => cfg.ppo.normalize_advantages = parse_bool()?,
            "agent_count" => cfg.agent_count = parse_usize()?,
            "eval_runs" => cfg.eval_runs = parse_usize()?,
            "train_instances" => cfg.train_instances = parse_usize()?,
            "val_instances" => cfg.val_instances = parse_usize()?,
            "knapsack_items" => cfg.knapsack_items = parse_usize()?,
            "knapsack_weight_limit" => cfg.knapsack_weight_limit = parse_f64()?,
            "tsp_nodes" => cfg.tsp_nodes = parse_usize()?,
            "functions_train" => cfg.functions_train = parse_function_list(v)?,
            "functions_val" => cfg.functions_val = parse_function_list(v)?,
            "seed" => {
                cfg.seed = v
                    .parse()
                    .map_err(|_| Error::parse(format!("`seed` expects a u64, got `{v}`")))?
            }
            "out_dir" => cfg.out_dir = PathBuf::from(v),
            "deterministic_eval" => cfg.deterministic_eval = parse_bool()?,
            "checkpoint_interval" => cfg.checkpoint_interval = parse_usize()?,
            "checkpoint" => cfg.checkpoint = Some(PathBuf::from(v)),
            "instance_dir" => cfg.instance_dir = Some(PathBuf::from(v)),
            "tune_runs" => cfg.tune_runs = parse_usize()?,
            "grid" => cfg.grid = parse_grid_spec(v, cfg.evo.population_size)?,
            "trace" => cfg.trace = parse_bool()?,
            other => return Err(Error::parse(format!("unknown config key `{other}`"))),
        }
    }
    Ok(cfg)
}

/// Loads a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read config `{}`: {e}", path.display())))?;
    config_from_text(&text)
}

/// The effective configuration as sorted `key = value` lines (the format
/// `config.snapshot` uses).
pub fn snapshot(cfg: &ExperimentConfig) -> String {
    let mut lines = vec![
        format!("problem = {}", cfg.problem.as_str()),
        format!(
            "method = {}",
            cfg.method.map(|m| m.id()).unwrap_or("baseline")
        ),
        format!("population_size = {}", cfg.evo.population_size),
        format!("elite_size = {}", cfg.evo.elite_size),
        format!("crossover_rate = {}", cfg.evo.crossover_rate),
        format!("mutation_rate = {}", cfg.evo.mutation_rate),
        format!("parent_percentage = {}", cfg.evo.parent_percentage),
        format!("strategy_parameter = {}", cfg.evo.strategy_parameter),
        format!("initial_step_size = {}", cfg.evo.initial_step_size),
        format!("min_step_size = {}", cfg.evo.min_step_size),
        format!("episode_length = {}", cfg.evo.episode_length),
        format!(
            "crossover_operator = {}",
            match cfg.evo.crossover_operator {
                OperatorChoice::Fixed(op) => op.as_str().to_string(),
                OperatorChoice::UniformRandom => "uniform-random".to_string(),
            }
        ),
        format!("gamma = {}", cfg.ppo.gamma),
        format!("lambda = {}", cfg.ppo.lambda),
        format!("clip_epsilon = {}", cfg.ppo.clip_epsilon),
        format!("value_loss_weight = {}", cfg.ppo.value_loss_weight),
        format!("entropy_weight = {}", cfg.ppo.entropy_weight),
        format!("reward_scale = {}", cfg.ppo.reward_scale),
        format!("learning_rate = {}", cfg.ppo.learning_rate),
        format!("minibatch_size = {}", cfg.ppo.minibatch_size),
        format!("epochs = {}", cfg.ppo.epochs),
        format!("iterations = {}", cfg.ppo.iterations),
        format!("actors = {}", cfg.ppo.actors),
        format!("normalize_advantages = {}", cfg.ppo.normalize_advantages),
        format!("agent_count = {}", cfg.agent_count),
        format!("eval_runs = {}", cfg.eval_runs),
        format!("train_instances = {}", cfg.train_instances),
        format!("val_instances = {}", cfg.val_instances),
        format!("knapsack_items = {}", cfg.knapsack_items),
        format!("knapsack_weight_limit = {}", cfg.knapsack_weight_limit),
        format!("tsp_nodes = {}", cfg.tsp_nodes),
        format!(
            "functions_train = {}",
            cfg.functions_train
                .iter()
                .map(|f| f.as_str())
                .collect::<Vec<_>>()
                .join(",")
        ),
        format!(
            "functions_val = {}",
            cfg.functions_val
                .iter()
                .map(|f| f.as_str())
                .collect::<Vec<_>>()
                .join(",")
        ),
        format!("seed = {}", cfg.seed),
        format!("deterministic_eval = {}", cfg.deterministic_eval),
        format!("checkpoint_interval = {}", cfg.checkpoint_interval),
        format!("tune_runs = {}", cfg.tune_runs),
        format!("trace = {}", cfg.trace),
    ];
    lines.sort();
    lines.join("\n") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapt::AdaptationMethod;
    use crate::problems::ProblemClass;

    #[test]
    fn parses_defaults_overrides_and_comments() {
        let text = "\
# comment line
problem = knapsack
method = pop-mutation-rate   # trailing comment
population_size = 12
mutation_rate = 0.02
seed = 99
";
        let cfg = config_from_text(text).unwrap();
        assert_eq!(cfg.problem, ProblemClass::Knapsack);
        assert_eq!(cfg.method, Some(AdaptationMethod::PopMutationRate));
        assert_eq!(cfg.evo.population_size, 12);
        assert_eq!(cfg.evo.mutation_rate, 0.02);
        assert_eq!(cfg.seed, 99);
        // untouched defaults survive
        assert_eq!(cfg.ppo.minibatch_size, 800);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(config_from_text("problem = knapsack\nbogus = 1\n").is_err());
        assert!(config_from_text("problem = knapsack\nmutation_rate = lots\n").is_err());
        assert!(config_from_text("mutation_rate = 0.1\n").is_err());
        assert!(config_from_text("problem = knapsack\nbroken line\n").is_err());
    }

    #[test]
    fn grid_specs_parse() {
        let cfg = config_from_text(
            "problem = knapsack\ngrid = mutation_rate:0.005:0.013:0.004, elite_size\n",
        )
        .unwrap();
        assert_eq!(cfg.grid.len(), 2);
        let want = [0.005, 0.009, 0.013];
        for (a, b) in cfg.grid[0].1.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(cfg.grid[1].1.len(), 11);
        assert!(config_from_text("problem = knapsack\ngrid = mutation_rate:1:2\n").is_err());
    }

    #[test]
    fn snapshot_is_stable_and_reparsable() {
        let cfg = ExperimentConfig::defaults(
            ProblemClass::Continuous,
            Some(AdaptationMethod::IndStepSize),
        )
        .unwrap();
        let snap = snapshot(&cfg);
        assert_eq!(snap, snapshot(&cfg));
        let reparsed = config_from_text(&snap).unwrap();
        assert_eq!(reparsed.method, cfg.method);
        assert_eq!(reparsed.ppo.learning_rate, cfg.ppo.learning_rate);
        assert_eq!(snapshot(&reparsed), snap);
    }
}
