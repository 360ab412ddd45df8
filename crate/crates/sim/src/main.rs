use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use irs_sim::checkpoint::Checkpoint;
use irs_sim::harness::{checkpoint_path, evaluate, run_action_space_sweep, run_comparison, run_training, TrainedAgent};
use irs_sim::{Algorithm, ExperimentConfig};
use std::path::PathBuf;

/// Train and compare IRS phase-control agents.
#[derive(Parser)]
#[command(name = "irs-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one algorithm for each seed, writing metric CSVs and checkpoints.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Algorithm::PpoGru)]
        algorithm: Algorithm,
    },
    /// Greedy evaluation of checkpoints written by `train`.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Algorithm::PpoGru)]
        algorithm: Algorithm,
        /// Evaluate this checkpoint instead of the ones under `--out`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train and evaluate every configured algorithm on every seed.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Train PPO-GRU for several action-set sizes.
    SweepActions {
        #[command(flatten)]
        common: Common,
        /// Comma-separated odd sizes; defaults to the config's list.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run this seed only.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training budget in environment steps.
    #[arg(long)]
    steps: Option<u64>,
}

impl Common {
    fn resolve(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.experiment.seeds = vec![seed];
        }
        if let Some(steps) = self.steps {
            cfg.experiment.desk_steps = steps;
            cfg.experiment.full_budget = false;
        }
        if let Some(out) = &self.out {
            cfg.experiment.out_dir = out.clone();
        }
        cfg.validate()?;
        let out = cfg.experiment.out_dir.clone();
        Ok((cfg, out))
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train { common, algorithm } => {
            let (cfg, out) = common.resolve()?;
            for &seed in &cfg.experiment.seeds {
                let run = run_training(&cfg, algorithm, seed, &out)?;
                let last = run.trace.last().map_or(f64::NAN, |r| r.mean_reward);
                println!(
                    "{algorithm} seed {seed}: {} batches, final mean reward {last:.4}, metrics {}",
                    run.trace.len(),
                    run.metrics_path.display()
                );
            }
        }
        Command::Evaluate {
            common,
            algorithm,
            checkpoint,
        } => {
            let (cfg, out) = common.resolve()?;
            let jobs: Vec<(u64, PathBuf)> = match checkpoint {
                Some(path) => {
                    let seed = Checkpoint::load(&path)?.seed;
                    vec![(seed, path)]
                }
                None => cfg.experiment.seeds.iter().map(|&s| (s, checkpoint_path(&out, algorithm, s))).collect(),
            };
            for (seed, path) in jobs {
                let ckpt = Checkpoint::load(&path).with_context(|| format!("loading {}", path.display()))?;
                let agent = TrainedAgent::from_checkpoint(&cfg, &ckpt)?;
                let rate = evaluate(&cfg, &agent, seed)?;
                println!("{} seed {seed}: mean rate {rate:.4} bit/s/Hz over {} slots", ckpt.algorithm, cfg.experiment.eval_slots);
            }
        }
        Command::Compare { common } => {
            let (cfg, out) = common.resolve()?;
            let summary = run_comparison(&cfg, &out)?;
            for block in &summary.blocks {
                println!("users = {}", block.n_users);
                println!("  {:<12} {:>9} {:>9} {:>21}", "algorithm", "mean", "std", "95% CI");
                for row in &block.summary {
                    let r = &row.rate;
                    println!("  {:<12} {:>9.4} {:>9.4} [{:>9.4}, {:>9.4}]", row.algorithm.name(), r.mean, r.std, r.ci_low, r.ci_high);
                }
            }
            println!("summary written to {}", out.join("comparison.toml").display());
        }
        Command::SweepActions { common, sizes } => {
            let (cfg, out) = common.resolve()?;
            let sizes = sizes.unwrap_or_else(|| cfg.experiment.action_sizes.clone());
            let summary = run_action_space_sweep(&cfg, &sizes, &out)?;
            println!("  {:>5} {:>10} {:>10} {:>14}", "|A|", "plateau", "std", "steps to 90%");
            for s in &summary.sizes {
                println!(
                    "  {:>5} {:>10.4} {:>10.4} {:>14.0}",
                    s.size, s.plateau.mean, s.plateau.std, s.convergence_steps.mean
                );
            }
            println!("summary written to {}", out.join("sweep.toml").display());
        }
    }
    Ok(())
}
