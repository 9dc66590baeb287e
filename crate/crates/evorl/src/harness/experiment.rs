//! Multi-agent experiment runs and instance-set materialization.
//!
//! Output directory layout:
//!
//! ```text
//! out/
//!   config.snapshot
//!   instances/{train,val}_<k>.inst
//!   checkpoints/agent_<k>.bin           final parameters per agent
//!   checkpoints/agent_<k>_iter<i>.bin   periodic checkpoints (optional)
//!   metrics/agent_<k>.csv               validation MBF(v) curve
//!   metrics/agent_<k>_progress.csv      training progress log
//!   metrics/baseline.csv                baseline on the same validation set
//!   summary.csv                         agent, terminal metric, rank, status
//! ```

use super::evaluate::{evaluate, write_metrics_csv, write_trace_csv};
use super::{instance_set, snapshot, ExperimentConfig, SetKind};
use crate::error::{Error, Result};
use crate::net::save_checkpoint;
use crate::ppo::train;
use crate::problems::save_instance;
use crate::rng::{self, ctx};
use std::io::Write;
use std::path::{Path, PathBuf};

/// Writes the training and validation instance sets as text files.
pub fn gen_instances(cfg: &ExperimentConfig, dir: &Path) -> Result<(usize, usize)> {
    std::fs::create_dir_all(dir)?;
    let train = instance_set(cfg, SetKind::Training)?;
    let val = instance_set(cfg, SetKind::Validation)?;
    for (k, inst) in train.iter().enumerate() {
        std::fs::write(dir.join(format!("train_{k:03}.inst")), save_instance(inst))?;
    }
    for (k, inst) in val.iter().enumerate() {
        std::fs::write(dir.join(format!("val_{k:03}.inst")), save_instance(inst))?;
    }
    Ok((train.len(), val.len()))
}

struct AgentRow {
    agent: String,
    terminal: Option<f64>,
    status: String,
}

/// Trains `agent_count` agents with distinct derived seeds, evaluates each
/// (and the baseline) on the validation set, and writes checkpoints,
/// metrics, and the ranked summary. A failing agent is recorded in the
/// summary; the remaining agents still run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let method = cfg
        .method
        .ok_or_else(|| Error::invalid("training requires a `method` in the config"))?;
    let out = &cfg.out_dir;
    std::fs::create_dir_all(out.join("checkpoints"))?;
    std::fs::create_dir_all(out.join("metrics"))?;
    std::fs::write(out.join("config.snapshot"), snapshot(cfg))?;
    gen_instances(cfg, &out.join("instances"))?;

    let train_set = instance_set(cfg, SetKind::Training)?;
    let val_set = instance_set(cfg, SetKind::Validation)?;

    // baseline comparison on the same validation set
    let baseline = evaluate(
        None,
        None,
        &val_set,
        cfg,
        cfg.eval_runs,
        cfg.deterministic_eval,
        rng::derive_seed(cfg.seed, &[ctx::EVAL, u64::MAX]),
    )?;
    write_metrics_csv(&baseline, &out.join("metrics/baseline.csv"))?;

    let continuous = baseline.continuous;
    let mut rows: Vec<AgentRow> = Vec::with_capacity(cfg.agent_count);
    for agent in 0..cfg.agent_count {
        let label = format!("agent_{agent}");
        let result = (|| -> Result<f64> {
            let agent_seed = rng::derive_seed(cfg.seed, &[ctx::AGENT, agent as u64]);
            let mut progress = String::from(
                "iteration,mean_return,loss,clip_loss,value_loss,entropy\n",
            );
            let ckpt_dir = out.join("checkpoints");
            let label_inner = label.clone();
            let params = train(
                method,
                &train_set,
                &cfg.evo,
                &cfg.ppo,
                agent_seed,
                cfg.checkpoint_interval,
                |p| {
                    progress.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        p.iteration, p.mean_return, p.loss, p.clip_loss, p.value_loss, p.entropy
                    ));
                },
                |iter, params| {
                    save_checkpoint(
                        params,
                        &ckpt_dir.join(format!("{label_inner}_iter{iter:05}.bin")),
                    )
                },
            )?;
            std::fs::write(out.join(format!("metrics/{label}_progress.csv")), progress)?;
            save_checkpoint(&params, &out.join(format!("checkpoints/{label}.bin")))?;
            let metrics = evaluate(
                Some(method),
                Some(&params),
                &val_set,
                cfg,
                cfg.eval_runs,
                cfg.deterministic_eval,
                rng::derive_seed(cfg.seed, &[ctx::EVAL, agent as u64]),
            )?;
            write_metrics_csv(&metrics, &out.join(format!("metrics/{label}.csv")))?;
            if cfg.trace {
                write_trace_csv(
                    &metrics.first_trace,
                    &out.join(format!("metrics/{label}_trace.csv")),
                )?;
            }
            Ok(metrics.terminal)
        })();
        match result {
            Ok(terminal) => rows.push(AgentRow {
                agent: label,
                terminal: Some(terminal),
                status: "ok".to_string(),
            }),
            Err(e) => rows.push(AgentRow {
                agent: label,
                terminal: None,
                status: format!("error: {e}").replace('\n', " "),
            }),
        }
    }

    // rank 1 = best terminal metric; failed agents rank last
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| match (rows[a].terminal, rows[b].terminal) {
        (Some(x), Some(y)) => {
            let ord = if continuous {
                x.partial_cmp(&y)
            } else {
                y.partial_cmp(&x)
            };
            ord.unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
        }
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.cmp(&b),
    });
    let mut rank = vec![0usize; rows.len()];
    for (pos, &i) in order.iter().enumerate() {
        rank[i] = pos + 1;
    }
    let metric = if continuous { "tmbfv" } else { "tmbf" };
    let mut summary = format!("agent,{metric},rank,status\n");
    for (i, row) in rows.iter().enumerate() {
        let terminal = row
            .terminal
            .map(|t| t.to_string())
            .unwrap_or_default();
        summary.push_str(&format!("{},{},{},{}\n", row.agent, terminal, rank[i], row.status));
    }
    summary.push_str(&format!("baseline,{},,reference\n", baseline.terminal));
    let mut f = std::fs::File::create(out.join("summary.csv"))?;
    f.write_all(summary.as_bytes())?;
    Ok(out.clone())
}
