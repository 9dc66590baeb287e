//! Policy and baseline evaluation: mean best fitness (combinatorial) and
//! mean best function value (continuous) per generation, averaged over
//! seeded runs across an instance set.

use super::ExperimentConfig;
use crate::adapt::{run_episode, AdaptationMethod, SampleMode, TraceRow};
use crate::error::{Error, Result};
use crate::net::NetworkParams;
use crate::problems::{ProblemClass, ProblemInstance};
use crate::rng::{self, ctx};
use rayon::prelude::*;
use std::io::Write;
use std::path::Path;

/// Per-run curves plus the aggregated metric.
#[derive(Debug, Clone)]
pub struct RunMetrics {
    /// One best-metric curve per (instance, run), `episode_length + 1` long.
    pub per_run: Vec<Vec<f64>>,
    /// MBF (combinatorial, larger is better) or MBFv (continuous, smaller
    /// is better) per generation.
    pub aggregate: Vec<f64>,
    /// Final-generation aggregate (tMBF / tMBFv).
    pub terminal: f64,
    /// True when the metric is MBFv.
    pub continuous: bool,
    /// Parameter trace of the first run of the first instance.
    pub first_trace: Vec<TraceRow>,
    pub mask_fallbacks: usize,
}

/// Runs the evaluator `runs` times per instance and averages the
/// per-generation best metric over every (instance, run) pair.
pub fn evaluate(
    method: Option<AdaptationMethod>,
    params: Option<&NetworkParams>,
    instances: &[ProblemInstance],
    cfg: &ExperimentConfig,
    runs: usize,
    deterministic: bool,
    seed: u64,
) -> Result<RunMetrics> {
    if runs < 1 {
        return Err(Error::invalid("evaluation needs at least one run"));
    }
    if instances.is_empty() {
        return Err(Error::invalid("evaluation needs at least one instance"));
    }
    if let (Some(m), Some(p)) = (method, params) {
        if p.method != m.id() {
            return Err(Error::invalid(format!(
                "checkpoint was trained for `{}`, not `{}`",
                p.method,
                m.id()
            )));
        }
    }
    let continuous = instances[0].class() == ProblemClass::Continuous;
    let mode = if deterministic {
        SampleMode::DeterministicMean
    } else {
        SampleMode::Stochastic
    };
    let cells: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|i| (0..runs).map(move |r| (i, r)))
        .collect();
    let episodes: Vec<_> = cells
        .par_iter()
        .map(|&(i, run)| {
            let mut r = rng::stream(seed, &[ctx::EVAL, i as u64, run as u64]);
            run_episode(method, params, &instances[i], &cfg.evo, mode, &mut r)
        })
        .collect::<Result<Vec<_>>>()?;

    let t_len = cfg.evo.episode_length + 1;
    let mut per_run = Vec::with_capacity(episodes.len());
    let mut mask_fallbacks = 0;
    for ep in &episodes {
        mask_fallbacks += ep.mask_fallbacks;
        let curve = if continuous {
            ep.best_function_value.clone().expect("continuous episode records g")
        } else {
            ep.best_fitness.clone()
        };
        debug_assert_eq!(curve.len(), t_len);
        per_run.push(curve);
    }
    let mut aggregate = vec![0.0; t_len];
    for curve in &per_run {
        for (a, v) in aggregate.iter_mut().zip(curve) {
            *a += v;
        }
    }
    for a in &mut aggregate {
        *a /= per_run.len() as f64;
    }
    let terminal = *aggregate.last().unwrap();
    Ok(RunMetrics {
        per_run,
        aggregate,
        terminal,
        continuous,
        first_trace: episodes[0].trace.clone(),
        mask_fallbacks,
    })
}

/// Writes the aggregate curve as `generation,<metric>` CSV.
pub fn write_metrics_csv(metrics: &RunMetrics, path: &Path) -> Result<()> {
    let mut out = String::new();
    let name = if metrics.continuous { "mbfv" } else { "mbf" };
    out.push_str(&format!("generation,{name}\n"));
    for (g, v) in metrics.aggregate.iter().enumerate() {
        out.push_str(&format!("{g},{v}\n"));
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Writes one run's per-generation trace of active evolution parameters.
pub fn write_trace_csv(trace: &[TraceRow], path: &Path) -> Result<()> {
    let mut out = String::from(
        "generation,best_fitness,mean_fitness,mutation_rate,strategy_parameter,operator\n",
    );
    for row in trace {
        let op = row.operator.map(|o| o.as_str()).unwrap_or("");
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.generation,
            row.best_fitness,
            row.mean_fitness,
            row.mutation_rate,
            row.strategy_param,
            op
        ));
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}
