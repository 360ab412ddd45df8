use super::{window_count, Window};
use crate::agent::RunningNormalizer;
use crate::env::{Environment, Observation, Policy};
use crate::metrics::BatchMetrics;
use crate::nncore::{argmax, Adam, AdamConfig, Mlp, Parameterized};
use crate::prelude::*;
use crate::rng::{substream, SimRng, Stream};
use crate::{Error, Result};
use rand::Rng;

/// Double DQN settings.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DqnConfig {
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Environment steps over which epsilon decays linearly.
    pub epsilon_decay_steps: u64,
    /// Gradient updates between target-network copies.
    pub target_sync_every: u64,
    pub hidden_size: usize,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            replay_capacity: 100_000,
            batch_size: 64,
            gamma: 0.99,
            learning_rate: 3e-4,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 100_000,
            target_sync_every: 1000,
            hidden_size: 64,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(format!("dqn: {m}")));
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return fail("need 1 <= batch_size <= replay_capacity");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail("gamma must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0) {
            return fail("learning_rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return fail("epsilon bounds must lie in [0, 1]");
        }
        if self.target_sync_every == 0 || self.hidden_size == 0 {
            return fail("target_sync_every and hidden_size must be >= 1");
        }
        Ok(())
    }
}

/// Exploration rate after `step` environment steps.
pub fn epsilon_at(config: &DqnConfig, step: u64) -> f64 {
    if step >= config.epsilon_decay_steps {
        return config.epsilon_end;
    }
    let frac = step as f64 / config.epsilon_decay_steps as f64;
    config.epsilon_start + frac * (config.epsilon_end - config.epsilon_start)
}

/// `r + gamma * Q_target(s', argmax_a Q_online(s', a))` per sample.
pub fn double_dqn_targets(rewards: &[f64], q_online_next: &[Vec<f64>], q_target_next: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    rewards
        .iter()
        .zip(q_online_next.iter().zip(q_target_next))
        .map(|(r, (online, target))| r + gamma * target[argmax(online)])
        .collect()
}

/// One stored transition; observations are already normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayItem {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// Ring buffer that overwrites its oldest entry once full.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<ReplayItem>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            items: Vec::new(),
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, item: ReplayItem) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.next] = item;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Uniform draw of `n` items with replacement.
    pub fn sample<'a, R: Rng + ?Sized>(&'a self, n: usize, rng: &mut R) -> Vec<&'a ReplayItem> {
        (0..n).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect()
    }
}

/// Double DQN over the flattened normalized observation.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub online: Mlp,
    pub target: Mlp,
    pub normalizer: RunningNormalizer,
    pub replay: ReplayBuffer,
    optimizer: Adam,
    config: DqnConfig,
    updates: u64,
}

impl DqnAgent {
    pub fn new(observation_shape: (usize, usize), num_actions: usize, config: DqnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = substream(seed, Stream::Init);
        let (p, c) = observation_shape;
        let h = config.hidden_size;
        let online = Mlp::new(&[p + c, h, h, num_actions], &mut rng);
        let optimizer = Adam::new(AdamConfig::with_learning_rate(config.learning_rate), &online.parameters());
        Ok(Self {
            target: online.clone(),
            online,
            normalizer: RunningNormalizer::new(p, c),
            replay: ReplayBuffer::new(config.replay_capacity),
            optimizer,
            config,
            updates: 0,
        })
    }

    pub fn config(&self) -> &DqnConfig {
        &self.config
    }

    pub fn num_actions(&self) -> usize {
        self.online.output_size()
    }

    /// Gradient updates performed so far.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Online Q-values for a raw observation under frozen normalization.
    pub fn q_values(&self, observation: &Observation) -> Vec<f64> {
        self.online.predict(&self.normalizer.normalize_frozen(observation).flatten())
    }

    pub fn sync_target(&mut self) {
        for (t, o) in self.target.parameters_mut().into_iter().zip(self.online.parameters()) {
            t.values_mut().copy_from_slice(o.values());
        }
    }

    /// Stores `item` and, once the replay holds a full mini-batch, takes one
    /// gradient step. Returns the mini-batch TD loss when an update happened.
    pub fn dqn_step<R: Rng + ?Sized>(&mut self, item: ReplayItem, rng: &mut R) -> Option<f64> {
        self.replay.push(item);
        if self.replay.len() < self.config.batch_size {
            return None;
        }
        let batch = self.replay.sample(self.config.batch_size, rng);
        let n = batch.len() as f64;
        let a = self.num_actions();
        let next: Vec<f64> = batch.iter().flat_map(|b| b.next_state.iter().copied()).collect();
        let q_online_next: Vec<Vec<f64>> = self.online.predict(&next).chunks(a).map(<[f64]>::to_vec).collect();
        let q_target_next: Vec<Vec<f64>> = self.target.predict(&next).chunks(a).map(<[f64]>::to_vec).collect();
        let rewards: Vec<f64> = batch.iter().map(|b| b.reward).collect();
        let y = double_dqn_targets(&rewards, &q_online_next, &q_target_next, self.config.gamma);

        let states: Vec<f64> = batch.iter().flat_map(|b| b.state.iter().copied()).collect();
        self.online.zero_grad();
        let (q, cache) = self.online.forward(&states);
        let mut d_q = vec![0.0; q.len()];
        let mut loss = 0.0;
        for (i, (b, target)) in batch.iter().zip(&y).enumerate() {
            let err = q[i * a + b.action] - target;
            loss += err * err;
            d_q[i * a + b.action] = 2.0 * err / n;
        }
        self.online.backward(&cache, &d_q);
        self.optimizer.step(&mut self.online.parameters_mut());
        self.updates += 1;
        if self.updates.is_multiple_of(self.config.target_sync_every) {
            self.sync_target();
        }
        Some(loss / n)
    }

    /// Epsilon-greedy on the continuing stream that starts at `env.reset(seed)`.
    pub fn train<E, F>(&mut self, env: &mut E, seed: u64, total_steps: u64, report_every: usize, mut on_batch: F) -> Result<Vec<BatchMetrics>>
    where
        E: Environment + ?Sized,
        F: FnMut(&BatchMetrics) -> Result<()>,
    {
        let windows = window_count(total_steps, report_every)?;
        if env.num_actions() != self.num_actions() {
            return Err(Error::ShapeMismatch {
                expected: vec![self.num_actions()],
                got: vec![env.num_actions()],
            });
        }
        let mut policy_rng = substream(seed, Stream::Policy);
        let mut replay_rng = substream(seed, Stream::Replay);
        let first = env.reset(seed)?;
        let mut state = self.normalizer.normalize_observation(&first).flatten();
        let mut window = Window::new(self.num_actions());
        let mut trace = Vec::new();
        let mut step = 0u64;
        for batch in 0..windows {
            for _ in 0..report_every {
                let action = self.explore(&state, epsilon_at(&self.config, step), &mut policy_rng);
                let out = env.step_action(action)?;
                let next_state = self.normalizer.normalize_observation(&out.observation).flatten();
                window.record(action, out.reward);
                let item = ReplayItem {
                    state: core::mem::replace(&mut state, next_state.clone()),
                    action,
                    reward: out.reward,
                    next_state,
                };
                if let Some(loss) = self.dqn_step(item, &mut replay_rng) {
                    window.record_loss(loss);
                }
                step += 1;
            }
            let row = window.finish(batch, step);
            on_batch(&row)?;
            trace.push(row);
        }
        Ok(trace)
    }

    fn explore(&self, state: &[f64], epsilon: f64, rng: &mut SimRng) -> usize {
        if rng.random::<f64>() < epsilon {
            rng.random_range(0..self.num_actions())
        } else {
            argmax(&self.online.predict(state))
        }
    }

    /// Argmax of the online network with frozen normalization statistics.
    pub fn greedy_policy(&self) -> QPolicy {
        QPolicy {
            net: self.online.clone(),
            normalizer: self.normalizer.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct QPolicy {
    net: Mlp,
    normalizer: RunningNormalizer,
}

impl Policy for QPolicy {
    fn act(&mut self, observation: &Observation) -> usize {
        argmax(&self.net.predict(&self.normalizer.normalize_frozen(observation).flatten()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stubs::ChainStub;
    use rand::SeedableRng;

    #[test]
    fn zero_discount_target_is_reward() {
        let y = double_dqn_targets(&[0.7, -1.5], &[vec![1.0, 2.0], vec![3.0, 0.0]], &[vec![9.0, 9.0], vec![9.0, 9.0]], 0.0);
        assert_eq!(y, vec![0.7, -1.5]);
    }

    #[test]
    fn target_uses_online_argmax() {
        // The online net prefers action 0, the target net would prefer action 1.
        let online = vec![vec![5.0, 1.0]];
        let target = vec![vec![2.0, 10.0]];
        let y = double_dqn_targets(&[1.0], &online, &target, 0.5);
        assert_eq!(y, vec![1.0 + 0.5 * 2.0]);
        let single = 1.0 + 0.5 * target[0].iter().cloned().fold(f64::MIN, f64::max);
        assert!(y[0] < single);
    }

    #[test]
    fn epsilon_schedule() {
        let c = DqnConfig::default();
        assert_eq!(epsilon_at(&c, 0), 1.0);
        assert!((epsilon_at(&c, 50_000) - 0.525).abs() < 1e-12);
        assert_eq!(epsilon_at(&c, 100_000), 0.05);
        assert_eq!(epsilon_at(&c, 10_000_000), 0.05);
    }

    #[test]
    fn ring_buffer_overwrites_oldest() {
        let mut r = ReplayBuffer::new(2);
        for i in 0..3 {
            r.push(ReplayItem {
                state: vec![i as f64],
                action: 0,
                reward: i as f64,
                next_state: vec![],
            });
        }
        assert_eq!(r.len(), 2);
        let mut rewards: Vec<f64> = r.items.iter().map(|x| x.reward).collect();
        rewards.sort_by(f64::total_cmp);
        assert_eq!(rewards, vec![1.0, 2.0]);
    }

    fn item(rng: &mut SimRng) -> ReplayItem {
        ReplayItem {
            state: vec![rng.random(), rng.random()],
            action: rng.random_range(0..2),
            reward: rng.random(),
            next_state: vec![rng.random(), rng.random()],
        }
    }

    #[test]
    fn underfull_replay_skips_update() {
        let config = DqnConfig {
            batch_size: 4,
            ..DqnConfig::default()
        };
        let mut agent = DqnAgent::new((1, 1), 2, config, 1).unwrap();
        let before = agent.online.clone();
        let mut rng = SimRng::seed_from_u64(0);
        for _ in 0..3 {
            assert!(agent.dqn_step(item(&mut rng), &mut rng).is_none());
        }
        assert_eq!(agent.online, before);
        assert!(agent.dqn_step(item(&mut rng), &mut rng).is_some());
        assert_ne!(agent.online, before);
    }

    #[test]
    fn target_sync_copies_bitwise() {
        let config = DqnConfig {
            batch_size: 2,
            target_sync_every: 3,
            ..DqnConfig::default()
        };
        let mut agent = DqnAgent::new((1, 1), 2, config, 2).unwrap();
        let mut rng = SimRng::seed_from_u64(1);
        let bits = |m: &Mlp| -> Vec<u64> { m.parameters().iter().flat_map(|p| p.values().iter().map(|v| v.to_bits())).collect() };
        for _ in 0..4 {
            agent.dqn_step(item(&mut rng), &mut rng);
        }
        assert_eq!(agent.updates(), 3);
        assert_eq!(bits(&agent.online), bits(&agent.target));
        agent.dqn_step(item(&mut rng), &mut rng);
        assert_ne!(bits(&agent.online), bits(&agent.target));
    }

    #[test]
    fn chain_q_matches_value_iteration() {
        let rewards = [[0.0, 1.0], [0.5, 0.0]];
        let gamma = 0.8;
        let config = DqnConfig {
            gamma,
            learning_rate: 1e-3,
            target_sync_every: 200,
            epsilon_decay_steps: 10_000,
            epsilon_end: 0.2,
            replay_capacity: 10_000,
            hidden_size: 32,
            ..DqnConfig::default()
        };
        let mut env = ChainStub::new(rewards);
        let mut agent = DqnAgent::new((2, 1), 2, config, 3).unwrap();
        agent.train(&mut env, 4, 50_000, 10_000, |_| Ok(())).unwrap();
        let q_star = env.optimal_q(gamma);
        for (s, row) in q_star.iter().enumerate() {
            let q = agent.q_values(&ChainStub::observation_of(s));
            for (a, want) in row.iter().enumerate() {
                assert!((q[a] - want).abs() < 0.05, "Q({s},{a}) = {} vs {want}", q[a]);
            }
        }
    }
}
