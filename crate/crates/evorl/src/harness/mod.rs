//! Experiment orchestration: instance sets, baseline tuning, evaluation
//! with the MBF/MBFv metrics, multi-agent training runs, and plot-data
//! export.

mod config;
mod evaluate;
mod experiment;
mod plotdata;
mod tune;

pub use config::{config_from_text, load_config, parse_config_text, snapshot};
pub use evaluate::{evaluate, write_metrics_csv, write_trace_csv, RunMetrics};
pub use experiment::{gen_instances, run_experiment};
pub use plotdata::emit_plotdata;
pub use tune::{default_grid, tune_baseline, write_grid_csv, GridParam, GridPoint};

use crate::adapt::AdaptationMethod;
use crate::error::{Error, Result};
use crate::evo::EvolutionConfig;
use crate::ppo::PpoHyperParams;
use crate::problems::{
    generate_knapsack_instance, generate_tsp_instance, load_instance, ObjectiveFunction,
    ObjectiveId, ProblemClass, ProblemInstance,
};
use crate::rng::{self, ctx};
use std::path::PathBuf;

/// Everything one experiment needs: problem class, optional adaptation
/// method, evolution and PPO parameters, instance-set sizes, and output
/// settings.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub problem: ProblemClass,
    pub method: Option<AdaptationMethod>,
    pub evo: EvolutionConfig,
    pub ppo: PpoHyperParams,
    pub agent_count: usize,
    pub eval_runs: usize,
    pub train_instances: usize,
    pub val_instances: usize,
    pub knapsack_items: usize,
    pub knapsack_weight_limit: f64,
    pub tsp_nodes: usize,
    pub functions_train: Vec<ObjectiveId>,
    pub functions_val: Vec<ObjectiveId>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub deterministic_eval: bool,
    pub checkpoint_interval: usize,
    pub checkpoint: Option<PathBuf>,
    pub instance_dir: Option<PathBuf>,
    pub tune_runs: usize,
    pub grid: Vec<(GridParam, Vec<f64>)>,
    pub trace: bool,
}

impl ExperimentConfig {
    /// Defaults for a problem class and optional method: benchmark evolution
    /// parameters, per-method PPO rows, 20/10 knapsack and 40/10 TSP
    /// instance splits, the 16/3 function split, 100 evaluation runs for
    /// combinatorial problems and 500 for continuous.
    pub fn defaults(problem: ProblemClass, method: Option<AdaptationMethod>) -> Result<Self> {
        if let Some(m) = method {
            if !m.applies_to(problem) {
                return Err(Error::invalid(format!(
                    "method `{}` does not apply to `{}`",
                    m.id(),
                    problem.as_str()
                )));
            }
        }
        let ppo = match method {
            Some(m) => PpoHyperParams::defaults_for(m, problem)?,
            // baseline-only configs still carry PPO settings (reward scale
            // is used by traces); take an arbitrary applicable row
            None => PpoHyperParams {
                gamma: 0.99,
                lambda: 0.99,
                clip_epsilon: 0.2,
                value_loss_weight: 0.5,
                entropy_weight: 1e-4,
                reward_scale: crate::ppo::default_reward_scale(problem),
                learning_rate: 1e-4,
                minibatch_size: 400,
                epochs: 4,
                iterations: 500,
                actors: 4,
                normalize_advantages: false,
            },
        };
        let (train_instances, val_instances) = match problem {
            ProblemClass::Knapsack => (20, 10),
            ProblemClass::Tsp => (40, 10),
            ProblemClass::Continuous => (16, 3),
        };
        let eval_runs = match problem {
            ProblemClass::Continuous => 500,
            _ => 100,
        };
        let mut evo = EvolutionConfig::defaults_for(problem);
        // the survivor-selection and fitness-shaping comparisons run the
        // continuous baseline with half the population as parents
        if problem == ProblemClass::Continuous
            && matches!(
                method,
                Some(AdaptationMethod::SurvivorSelection) | Some(AdaptationMethod::FitnessShaping)
            )
        {
            evo.parent_percentage = 0.5;
        }
        Ok(ExperimentConfig {
            problem,
            method,
            evo,
            ppo,
            agent_count: 3,
            eval_runs,
            train_instances,
            val_instances,
            knapsack_items: 100,
            knapsack_weight_limit: 10.0,
            tsp_nodes: 30,
            functions_train: ObjectiveId::TRAIN.to_vec(),
            functions_val: ObjectiveId::VALIDATION.to_vec(),
            seed: 0,
            out_dir: PathBuf::from("out"),
            deterministic_eval: true,
            checkpoint_interval: 0,
            checkpoint: None,
            instance_dir: None,
            tune_runs: 20,
            grid: Vec::new(),
            trace: false,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.evo.validate(self.problem)?;
        self.ppo.validate()?;
        if self.agent_count < 1 {
            return Err(Error::invalid("agent_count must be at least 1"));
        }
        if self.eval_runs < 1 {
            return Err(Error::invalid("eval_runs must be at least 1"));
        }
        if let Some(dir) = &self.instance_dir {
            if !dir.is_dir() {
                return Err(Error::invalid(format!(
                    "instance_dir `{}` does not exist",
                    dir.display()
                )));
            }
        }
        if let Some(ck) = &self.checkpoint {
            if !ck.is_file() {
                return Err(Error::invalid(format!(
                    "checkpoint `{}` does not exist",
                    ck.display()
                )));
            }
        }
        Ok(())
    }
}

/// Instance-set role, part of the seed derivation path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetKind {
    Training,
    Validation,
}

fn set_tag(kind: SetKind) -> u64 {
    match kind {
        SetKind::Training => 0,
        SetKind::Validation => 1,
    }
}

/// Generates (or loads, when `instance_dir` is set) one instance set.
pub fn instance_set(cfg: &ExperimentConfig, kind: SetKind) -> Result<Vec<ProblemInstance>> {
    if let Some(dir) = &cfg.instance_dir {
        let prefix = match kind {
            SetKind::Training => "train_",
            SetKind::Validation => "val_",
        };
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .map(|n| n.starts_with(prefix) && n.ends_with(".inst"))
                    .unwrap_or(false)
            })
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(Error::invalid(format!(
                "no {prefix}*.inst files in `{}`",
                dir.display()
            )));
        }
        return paths.iter().map(|p| load_instance(p)).collect();
    }
    let count = match kind {
        SetKind::Training => cfg.train_instances,
        SetKind::Validation => cfg.val_instances,
    };
    match cfg.problem {
        ProblemClass::Knapsack => (0..count)
            .map(|k| {
                let seed = rng::derive_seed(cfg.seed, &[ctx::INSTANCE, set_tag(kind), k as u64]);
                let mut r = rng::stream(seed, &[]);
                Ok(ProblemInstance::Knapsack(generate_knapsack_instance(
                    cfg.knapsack_items,
                    cfg.knapsack_weight_limit,
                    seed,
                    &mut r,
                )?))
            })
            .collect(),
        ProblemClass::Tsp => (0..count)
            .map(|k| {
                let seed = rng::derive_seed(cfg.seed, &[ctx::INSTANCE, set_tag(kind), k as u64]);
                let mut r = rng::stream(seed, &[]);
                Ok(ProblemInstance::Tsp(generate_tsp_instance(
                    cfg.tsp_nodes,
                    seed,
                    &mut r,
                )?))
            })
            .collect(),
        ProblemClass::Continuous => {
            let ids = match kind {
                SetKind::Training => &cfg.functions_train,
                SetKind::Validation => &cfg.functions_val,
            };
            Ok(ids
                .iter()
                .map(|&id| ProblemInstance::Continuous(ObjectiveFunction::new(id)))
                .collect())
        }
    }
}
