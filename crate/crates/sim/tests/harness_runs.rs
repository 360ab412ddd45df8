mod common;

use common::tiny_config;
use irs_core::env::{evaluate_policy, EnvConfig, Environment, IrsEnv, Observation, Policy};
use irs_core::baselines::RandomPolicy;
use irs_sim::checkpoint::Checkpoint;
use irs_sim::harness::{
    comparison_algorithms, evaluate, run_action_space_sweep, run_comparison, run_training, with_action_size, TrainedAgent,
};
use irs_sim::metrics::read_metrics;
use irs_sim::Algorithm;

#[test]
fn budget_of_two_batches_gives_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    for algorithm in Algorithm::ALL {
        let run = run_training(&tiny_config(128), algorithm, 1, dir.path()).unwrap();
        let rows = read_metrics(&run.metrics_path).unwrap();
        assert_eq!(rows.len(), 2, "{algorithm}");
        assert_eq!(rows, run.trace);
        assert_eq!(rows[1].step, 128);
        assert!(run.checkpoint_path.exists());
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for algorithm in Algorithm::ALL {
        let ra = run_training(&tiny_config(192), algorithm, 5, a.path()).unwrap();
        let rb = run_training(&tiny_config(192), algorithm, 5, b.path()).unwrap();
        assert_eq!(std::fs::read(&ra.metrics_path).unwrap(), std::fs::read(&rb.metrics_path).unwrap(), "{algorithm}");
        assert_eq!(std::fs::read(&ra.checkpoint_path).unwrap(), std::fs::read(&rb.checkpoint_path).unwrap(), "{algorithm}");
    }
}

#[test]
fn random_trace_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(256 * 40);
    cfg.ppo.batch_size = 256;
    let run = run_training(&cfg, Algorithm::Random, 3, dir.path()).unwrap();
    let r: Vec<f64> = run.trace.iter().map(|m| m.mean_reward).collect();
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    let sd = (r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r.len() - 1) as f64).sqrt();
    let half = r.len() / 2;
    let first = r[..half].iter().sum::<f64>() / half as f64;
    let second = r[half..].iter().sum::<f64>() / (r.len() - half) as f64;
    // Difference of two means of 20 windows each.
    let se = sd * (2.0 / half as f64).sqrt();
    assert!((first - second).abs() < 4.0 * se, "{first} vs {second}, se {se}");
    let slope = {
        let n = r.len() as f64;
        let xm = (n - 1.0) / 2.0;
        let sxy: f64 = r.iter().enumerate().map(|(i, y)| (i as f64 - xm) * (y - mean)).sum();
        let sxx: f64 = (0..r.len()).map(|i| (i as f64 - xm).powi(2)).sum();
        sxy / sxx
    };
    assert!(slope.abs() * r.len() as f64 <= 4.0 * se, "drift {slope}");
}

#[test]
fn checkpoints_reproduce_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(128);
    for algorithm in Algorithm::ALL {
        let run = run_training(&cfg, algorithm, 2, dir.path()).unwrap();
        let restored = TrainedAgent::from_checkpoint(&cfg, &Checkpoint::load(&run.checkpoint_path).unwrap()).unwrap();
        assert_eq!(restored.algorithm(), algorithm);
        let a = evaluate(&cfg, &run.agent, 2).unwrap();
        let b = evaluate(&cfg, &restored, 2).unwrap();
        assert_eq!(a.to_bits(), b.to_bits(), "{algorithm}");
    }
}

#[test]
fn checkpoint_for_other_scene_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let run = run_training(&tiny_config(64), Algorithm::PpoGru, 1, dir.path()).unwrap();
    let mut other = tiny_config(64);
    other.env.n_irs_elements = 16;
    assert!(TrainedAgent::from_checkpoint(&other, &Checkpoint::load(&run.checkpoint_path).unwrap()).is_err());
}

#[test]
fn comparison_accounting() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(64);
    cfg.experiment.seeds = vec![1, 2, 3];
    cfg.experiment.algorithms = vec![Algorithm::PpoGru];
    assert_eq!(comparison_algorithms(&cfg), vec![Algorithm::Random, Algorithm::PpoGru]);
    let summary = run_comparison(&cfg, dir.path()).unwrap();
    assert_eq!(summary.blocks.len(), 1);
    let block = &summary.blocks[0];
    assert_eq!(block.runs.len(), 6);
    assert_eq!(block.summary.len(), 2);
    for row in &block.summary {
        let rates: Vec<f64> = block.runs.iter().filter(|r| r.algorithm == row.algorithm).map(|r| r.mean_rate).collect();
        assert!((row.rate.mean - rates.iter().sum::<f64>() / 3.0).abs() < 1e-12);
    }
    assert!(dir.path().join("comparison.toml").exists());
    assert!(dir.path().join("users2/ppo_gru_seed3.csv").exists());
}

#[test]
fn comparison_has_one_block_per_user_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(64);
    cfg.experiment.seeds = vec![1];
    cfg.experiment.algorithms = vec![Algorithm::Bandit];
    cfg.experiment.user_counts = vec![2, 3];
    let summary = run_comparison(&cfg, dir.path()).unwrap();
    let counts: Vec<usize> = summary.blocks.iter().map(|b| b.n_users).collect();
    assert_eq!(counts, vec![2, 3]);
    for b in &summary.blocks {
        assert_eq!(b.runs.len(), 2);
    }
}

#[test]
fn sweep_accounting() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(128);
    cfg.experiment.seeds = vec![4, 5];
    let halves: Vec<usize> = [3, 5, 11].iter().map(|&s| with_action_size(&cfg, s).unwrap().env.action_half_width).collect();
    assert_eq!(halves, vec![1, 2, 5]);
    let summary = run_action_space_sweep(&cfg, &[3, 5, 11], dir.path()).unwrap();
    assert_eq!(summary.entries.len(), 6);
    assert_eq!(summary.sizes.len(), 3);
    for e in &summary.entries {
        assert!(e.convergence_steps >= 64 && e.convergence_steps <= 128);
    }
    assert!(with_action_size(&cfg, 4).is_err());
}

#[test]
fn single_action_ppo_matches_single_arm_random() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_action_size(&tiny_config(192), 1).unwrap();
    let ppo = run_training(&cfg, Algorithm::PpoGru, 6, dir.path()).unwrap();
    let random = run_training(&cfg, Algorithm::Random, 6, dir.path()).unwrap();
    let rewards = |t: &[irs_core::metrics::BatchMetrics]| t.iter().map(|m| m.mean_reward.to_bits()).collect::<Vec<_>>();
    assert_eq!(rewards(&ppo.trace), rewards(&random.trace));
    assert!(ppo.trace.iter().all(|m| m.entropy == 0.0));
}

struct Permuted {
    inner: RandomPolicy,
    map: Vec<usize>,
}

impl Policy for Permuted {
    fn act(&mut self, obs: &Observation) -> usize {
        self.map[self.inner.act(obs)]
    }
}

#[test]
fn random_rate_ignores_action_labels() {
    let env_cfg = EnvConfig {
        n_irs_elements: 8,
        ..EnvConfig::default()
    };
    let mut env = IrsEnv::new(env_cfg).unwrap();
    let n = env.num_actions();
    let slots = 20_000;
    let mut plain = RandomPolicy::new(n, 9);
    let base = evaluate_policy(&mut env, &mut plain, slots, 4).unwrap();
    let mut per_slot = Vec::new();
    let mut probe = RandomPolicy::new(n, 9);
    let mut obs = env.reset(4).unwrap();
    for _ in 0..2000 {
        let s = env.step_action(probe.act(&obs)).unwrap();
        per_slot.push(s.reward);
        obs = s.observation;
    }
    let m = per_slot.iter().sum::<f64>() / per_slot.len() as f64;
    let sd = (per_slot.iter().map(|r| (r - m).powi(2)).sum::<f64>() / per_slot.len() as f64).sqrt();
    let tol = 5.0 * sd * (2.0 / slots as f64).sqrt();
    for map in [vec![4, 3, 2, 1, 0], vec![1, 2, 3, 4, 0], vec![2, 0, 4, 1, 3]] {
        let mut p = Permuted {
            inner: RandomPolicy::new(n, 9),
            map,
        };
        let rate = evaluate_policy(&mut env, &mut p, slots, 4).unwrap();
        assert!((rate - base).abs() < tol, "{rate} vs {base} (tol {tol})");
    }
}
