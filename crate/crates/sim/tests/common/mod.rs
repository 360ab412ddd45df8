#![allow(dead_code)]

use irs_sim::ExperimentConfig;

/// Small networks and budgets so a run takes well under a second.
pub fn tiny_config(desk_steps: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.ppo.batch_size = 64;
    cfg.ppo.minibatch_size = 16;
    cfg.ppo.hidden_size = 8;
    cfg.ppo.update_epochs = 2;
    cfg.dqn.batch_size = 16;
    cfg.dqn.replay_capacity = 1000;
    cfg.dqn.hidden_size = 8;
    cfg.env.n_irs_elements = 8;
    cfg.experiment.desk_steps = desk_steps;
    cfg.experiment.eval_slots = 200;
    cfg
}
