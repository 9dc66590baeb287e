//! Command-line harness for instance generation, baseline tuning, agent
//! training, evaluation, and plot-data export.

use clap::{Parser, Subcommand};
use evorl::adapt::AdaptationMethod;
use evorl::error::{Error, Result};
use evorl::harness::{
    default_grid, emit_plotdata, evaluate, gen_instances, instance_set, load_config,
    run_experiment, tune_baseline, write_grid_csv, write_metrics_csv, write_trace_csv,
    ExperimentConfig, SetKind,
};
use evorl::net::load_checkpoint;
use evorl::problems::ProblemClass;
use evorl::rng::{self, ctx};
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Parser)]
#[command(
    name = "evorl",
    about = "Reinforcement-learning-controlled evolutionary algorithms",
    version
)]
struct Cli {
    /// Experiment configuration file (key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (overrides the config file).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the training and validation instance sets as text files.
    GenInstances,
    /// Grid-search static evolution parameters for the baseline.
    Tune,
    /// Train agents and evaluate them against the baseline.
    Train,
    /// Evaluate the baseline or a trained checkpoint on the validation set.
    Evaluate,
    /// Merge metrics CSVs into one long-format plot-data CSV.
    PlotData {
        /// Metrics files to merge.
        files: Vec<PathBuf>,
    },
}

fn effective_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => {
            return Err(Error::invalid(
                "this subcommand needs --config <file> (with at least `problem = ...`)",
            ))
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Error::invalid(format!("cannot configure thread pool: {e}")))?;
    }
    match &cli.command {
        Command::GenInstances => {
            let cfg = effective_config(&cli)?;
            let dir = cfg.out_dir.join("instances");
            let (train, val) = gen_instances(&cfg, &dir)?;
            println!(
                "wrote {train} training and {val} validation instances to {}",
                dir.display()
            );
        }
        Command::Tune => {
            let cfg = effective_config(&cli)?;
            let instances = instance_set(&cfg, SetKind::Training)?;
            let grid = if cfg.grid.is_empty() {
                default_grid(cfg.problem, cfg.evo.population_size)
            } else {
                cfg.grid.clone()
            };
            let (best, table) = tune_baseline(&instances, &cfg, &grid, cfg.tune_runs, cfg.seed)?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            let table_path = cfg.out_dir.join("grid.csv");
            write_grid_csv(&table, cfg.problem == ProblemClass::Continuous, &table_path)?;
            println!("grid table written to {}", table_path.display());
            println!(
                "best point: mutation_rate={} crossover_rate={} elite_size={} \
                 parent_percentage={} strategy_parameter={}",
                best.mutation_rate,
                best.crossover_rate,
                best.elite_size,
                best.parent_percentage,
                best.strategy_parameter
            );
        }
        Command::Train => {
            let cfg = effective_config(&cli)?;
            let out = run_experiment(&cfg)?;
            println!("experiment written to {}", out.display());
        }
        Command::Evaluate => {
            let cfg = effective_config(&cli)?;
            let instances = instance_set(&cfg, SetKind::Validation)?;
            let (method, params) = match &cfg.checkpoint {
                Some(path) => {
                    let params = load_checkpoint(path)?;
                    let method = AdaptationMethod::from_str(&params.method)?;
                    (Some(method), Some(params))
                }
                None => (None, None),
            };
            let metrics = evaluate(
                method,
                params.as_ref(),
                &instances,
                &cfg,
                cfg.eval_runs,
                cfg.deterministic_eval,
                rng::derive_seed(cfg.seed, &[ctx::EVAL]),
            )?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            let label = method.map(|m| m.id()).unwrap_or("baseline");
            let path = cfg.out_dir.join(format!("{label}.csv"));
            write_metrics_csv(&metrics, &path)?;
            if cfg.trace {
                write_trace_csv(
                    &metrics.first_trace,
                    &cfg.out_dir.join(format!("{label}_trace.csv")),
                )?;
            }
            println!(
                "metrics written to {} (terminal {} = {})",
                path.display(),
                if metrics.continuous { "tMBFv" } else { "tMBF" },
                metrics.terminal
            );
        }
        Command::PlotData { files } => {
            if files.is_empty() {
                return Err(Error::invalid("plot-data needs at least one metrics file"));
            }
            let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&out_dir)?;
            let out = out_dir.join("plotdata.csv");
            emit_plotdata(files, &out)?;
            println!("plot data written to {}", out.display());
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
