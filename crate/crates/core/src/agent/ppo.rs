//! Proximal policy optimization over [`SequenceNet`] actors and critics.

use super::advantage::{mean_std, normalize_advantages, normalize_advantages_minibatch};
use super::buffer::{RolloutBuffer, Transition};
use super::network::{DualBranchNet, SequenceNet};
use super::normalizer::RunningNormalizer;
use crate::env::{Environment, Observation, Policy};
use crate::metrics::BatchMetrics;
use crate::nncore::{argmax, clip_grad_norm, entropy, entropy_grad_logits, log_softmax, sample_index, softmax, Adam, AdamConfig};
use crate::prelude::*;
use crate::rng::{substream, Stream};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;

/// Initial scale of the actor's output weights; keeps the first policy close
/// to uniform.
pub const ACTOR_HEAD_SCALE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PpoHyperparams {
    pub total_steps: u64,
    pub batch_size: usize,
    pub minibatch_size: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub clip_epsilon: f64,
    pub entropy_coef: f64,
    pub update_epochs: usize,
    pub max_grad_norm: f64,
    pub hidden_size: usize,
}

impl Default for PpoHyperparams {
    fn default() -> Self {
        Self {
            total_steps: 10_000_000,
            batch_size: 2048,
            minibatch_size: 64,
            gamma: 0.99,
            gae_lambda: 0.95,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            clip_epsilon: 0.2,
            entropy_coef: 0.01,
            update_epochs: 10,
            max_grad_norm: 0.5,
            hidden_size: 64,
        }
    }
}

impl PpoHyperparams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail(format!("gamma must be in (0, 1], got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return fail(format!("gae_lambda must be in [0, 1], got {}", self.gae_lambda));
        }
        if !(self.clip_epsilon > 0.0) {
            return fail(format!("clip_epsilon must be > 0, got {}", self.clip_epsilon));
        }
        if !(self.entropy_coef >= 0.0) {
            return fail(format!("entropy_coef must be >= 0, got {}", self.entropy_coef));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return fail("learning rates must be > 0".into());
        }
        if !(self.max_grad_norm > 0.0) {
            return fail("max_grad_norm must be > 0".into());
        }
        if self.minibatch_size < 2 {
            return fail(format!("minibatch_size must be >= 2, got {}", self.minibatch_size));
        }
        if self.batch_size == 0 || !self.batch_size.is_multiple_of(self.minibatch_size) {
            return fail(format!(
                "minibatch_size {} must divide batch_size {}",
                self.minibatch_size, self.batch_size
            ));
        }
        if self.update_epochs == 0 || self.hidden_size == 0 {
            return fail("update_epochs and hidden_size must be >= 1".into());
        }
        if self.total_steps < self.batch_size as u64 {
            return fail(format!(
                "total_steps {} is smaller than one batch of {}",
                self.total_steps, self.batch_size
            ));
        }
        Ok(())
    }

    /// Number of PPO iterations a training run performs.
    pub fn num_batches(&self) -> u64 {
        self.total_steps / self.batch_size as u64
    }
}

/// The clipped target `g(eps, A)`: `(1 + eps) A` for `A >= 0`, else `(1 - eps) A`.
pub fn clip_target(epsilon: f64, advantage: f64) -> f64 {
    if advantage >= 0.0 {
        (1.0 + epsilon) * advantage
    } else {
        (1.0 - epsilon) * advantage
    }
}

/// Where advantages are standardized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdvantageNormalization {
    /// Separately inside each mini-batch, at use time.
    MiniBatch,
    /// Once over the whole batch before any mini-batch is drawn.
    WholeBatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionChoice<H> {
    pub index: usize,
    pub log_prob: f64,
    pub next_hidden: H,
}

/// Samples an action from the actor's policy.
pub fn select_action<N: SequenceNet, R: Rng + ?Sized>(
    actor: &N,
    obs: &Observation,
    hidden: &N::Hidden,
    rng: &mut R,
) -> ActionChoice<N::Hidden> {
    let (logits, next_hidden) = actor.step(obs, hidden);
    let index = sample_index(&softmax(&logits), rng);
    ActionChoice {
        index,
        log_prob: log_softmax(&logits)[index],
        next_hidden,
    }
}

/// The most probable action; consumes no randomness.
pub fn greedy_action<N: SequenceNet>(actor: &N, obs: &Observation, hidden: &N::Hidden) -> ActionChoice<N::Hidden> {
    let (logits, next_hidden) = actor.step(obs, hidden);
    let index = argmax(&logits);
    ActionChoice {
        index,
        log_prob: log_softmax(&logits)[index],
        next_hidden,
    }
}

/// Averages over all mini-batch updates of one PPO iteration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateDiagnostics {
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub entropy: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub minibatches: usize,
}

/// Actor, critic, their optimizers and the shared observation normalizer.
#[derive(Debug, Clone)]
pub struct PpoAgent<N: SequenceNet> {
    pub actor: N,
    pub critic: N,
    pub normalizer: RunningNormalizer,
    actor_opt: Adam,
    critic_opt: Adam,
    hp: PpoHyperparams,
    advantage_norm: AdvantageNormalization,
}

impl PpoAgent<DualBranchNet> {
    /// The recurrent dual-branch agent with mini-batch advantage normalization.
    pub fn recurrent(observation_shape: (usize, usize), num_actions: usize, hp: PpoHyperparams, seed: u64) -> Result<Self> {
        hp.validate()?;
        let mut rng = substream(seed, Stream::Init);
        let (p, c) = observation_shape;
        let actor = DualBranchNet::new(p, c, hp.hidden_size, num_actions, ACTOR_HEAD_SCALE, &mut rng);
        let critic = DualBranchNet::new(p, c, hp.hidden_size, 1, 1.0, &mut rng);
        Self::from_networks(actor, critic, observation_shape, hp, AdvantageNormalization::MiniBatch)
    }
}

impl<N: SequenceNet> PpoAgent<N> {
    pub fn from_networks(
        actor: N,
        critic: N,
        observation_shape: (usize, usize),
        hp: PpoHyperparams,
        advantage_norm: AdvantageNormalization,
    ) -> Result<Self> {
        hp.validate()?;
        if critic.output_size() != 1 {
            return Err(Error::ShapeMismatch {
                expected: vec![1],
                got: vec![critic.output_size()],
            });
        }
        let actor_opt = Adam::new(AdamConfig::with_learning_rate(hp.actor_lr), &actor.parameters());
        let critic_opt = Adam::new(AdamConfig::with_learning_rate(hp.critic_lr), &critic.parameters());
        Ok(Self {
            actor,
            critic,
            normalizer: RunningNormalizer::new(observation_shape.0, observation_shape.1),
            actor_opt,
            critic_opt,
            hp,
            advantage_norm,
        })
    }

    pub fn hyperparams(&self) -> &PpoHyperparams {
        &self.hp
    }

    pub fn num_actions(&self) -> usize {
        self.actor.output_size()
    }

    pub fn advantage_normalization(&self) -> AdvantageNormalization {
        self.advantage_norm
    }

    /// Log-probabilities of the stored actions over `start..start + len`,
    /// replayed from the hidden state stored at `start`.
    pub fn replay_log_probs(&self, buffer: &RolloutBuffer<N::Hidden>, start: usize, len: usize) -> Vec<f64> {
        let tr = &buffer.transitions()[start..start + len];
        let obs: Vec<&Observation> = tr.iter().map(|t| &t.observation).collect();
        let (logits, _) = self.actor.forward_sequence(&obs, &tr[0].actor_hidden);
        logits.iter().zip(tr).map(|(l, t)| log_softmax(l)[t.action]).collect()
    }

    /// Index sets of the mini-batches for one epoch: shuffled contiguous
    /// windows for recurrent networks, shuffled single steps otherwise.
    fn minibatch_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<usize>> {
        let m = self.hp.minibatch_size;
        if self.actor.is_recurrent() {
            let mut starts: Vec<usize> = (0..n / m).map(|i| i * m).collect();
            starts.shuffle(rng);
            starts.into_iter().map(|s| (s..s + m).collect()).collect()
        } else {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(rng);
            idx.chunks(m).map(|c| c.to_vec()).collect()
        }
    }

    /// Runs `update_epochs` passes of clipped-surrogate ascent for the actor
    /// and value regression for the critic over a finished buffer.
    pub fn ppo_update<R: Rng + ?Sized>(&mut self, buffer: &RolloutBuffer<N::Hidden>, rng: &mut R) -> Result<UpdateDiagnostics> {
        buffer.require_targets()?;
        let transitions = buffer.transitions();
        let batch_adv = match self.advantage_norm {
            AdvantageNormalization::WholeBatch => normalize_advantages(buffer.advantages())?,
            AdvantageNormalization::MiniBatch => buffer.advantages().to_vec(),
        };
        let returns = buffer.returns();
        let eps = self.hp.clip_epsilon;
        let delta = self.hp.entropy_coef;
        let mut diag = UpdateDiagnostics::default();
        let mut samples = 0usize;

        for _ in 0..self.hp.update_epochs {
            for idx in self.minibatch_indices(transitions.len(), rng) {
                let n = idx.len() as f64;
                let mb: Vec<&Transition<N::Hidden>> = idx.iter().map(|&i| &transitions[i]).collect();
                let obs: Vec<&Observation> = mb.iter().map(|t| &t.observation).collect();
                let raw: Vec<f64> = idx.iter().map(|&i| batch_adv[i]).collect();
                let adv = match self.advantage_norm {
                    AdvantageNormalization::MiniBatch => {
                        let a = normalize_advantages_minibatch(&raw)?;
                        debug_assert!(standardized(&raw, &a), "mini-batch advantages are not standardized");
                        a
                    }
                    AdvantageNormalization::WholeBatch => raw,
                };

                // Actor.
                self.actor.zero_grad();
                let (logits, cache) = self.actor.forward_sequence(&obs, &mb[0].actor_hidden);
                let mut d_logits = Vec::with_capacity(logits.len());
                let mut objective = 0.0;
                for ((l, t), &a) in logits.iter().zip(&mb).zip(&adv) {
                    let p = softmax(l);
                    let ratio = (log_softmax(l)[t.action] - t.log_prob).exp();
                    let unclipped = ratio * a;
                    let clipped = clip_target(eps, a);
                    let h = entropy(&p);
                    objective += unclipped.min(clipped) + delta * h;
                    diag.mean_ratio += ratio;
                    diag.entropy += h;

                    // Gradient of the negated objective divided by the mini-batch size.
                    let mut d: Vec<f64> = entropy_grad_logits(&p).iter().map(|g| -delta * g / n).collect();
                    if unclipped <= clipped {
                        for (j, dj) in d.iter_mut().enumerate() {
                            let onehot = if j == t.action { 1.0 } else { 0.0 };
                            *dj -= a * ratio * (onehot - p[j]) / n;
                        }
                    } else {
                        diag.clip_fraction += 1.0;
                    }
                    d_logits.push(d);
                }
                self.actor.backward_sequence(&cache, &d_logits);
                let mut params = self.actor.parameters_mut();
                clip_grad_norm(&mut params, self.hp.max_grad_norm);
                self.actor_opt.step(&mut params);
                diag.actor_loss -= objective / n;

                // Critic.
                self.critic.zero_grad();
                let (values, cache) = self.critic.forward_sequence(&obs, &mb[0].critic_hidden);
                let mut loss = 0.0;
                let d_values: Vec<Vec<f64>> = values
                    .iter()
                    .zip(&idx)
                    .map(|(v, &i)| {
                        let err = v[0] - returns[i];
                        loss += err * err;
                        vec![2.0 * err / n]
                    })
                    .collect();
                self.critic.backward_sequence(&cache, &d_values);
                let mut params = self.critic.parameters_mut();
                clip_grad_norm(&mut params, self.hp.max_grad_norm);
                self.critic_opt.step(&mut params);
                diag.critic_loss += loss / n;

                diag.minibatches += 1;
                samples += idx.len();
            }
        }
        let m = diag.minibatches as f64;
        let s = samples as f64;
        diag.mean_ratio /= s;
        diag.clip_fraction /= s;
        diag.entropy /= s;
        diag.actor_loss /= m;
        diag.critic_loss /= m;
        Ok(diag)
    }

    /// Resets `env` and returns the position at the head of its stream.
    pub fn start_stream<E: Environment + ?Sized>(&mut self, env: &mut E, seed: u64) -> Result<RolloutCursor<N::Hidden>> {
        let first = env.reset(seed)?;
        Ok(RolloutCursor {
            obs: self.normalizer.normalize_observation(&first),
            actor_hidden: self.actor.initial_hidden(),
            critic_hidden: self.critic.initial_hidden(),
        })
    }

    /// Fills `buffer` with `batch_size` steps sampled from the current policy,
    /// computes its targets and advances `cursor` to the first unseen state.
    pub fn collect<E: Environment + ?Sized, R: Rng + ?Sized>(
        &mut self,
        env: &mut E,
        cursor: &mut RolloutCursor<N::Hidden>,
        buffer: &mut RolloutBuffer<N::Hidden>,
        rng: &mut R,
    ) -> Result<()> {
        buffer.clear();
        for _ in 0..self.hp.batch_size {
            let choice = select_action(&self.actor, &cursor.obs, &cursor.actor_hidden, rng);
            let (value, critic_next) = self.critic.step(&cursor.obs, &cursor.critic_hidden);
            let step = env.step_action(choice.index)?;
            let next_obs = self.normalizer.normalize_observation(&step.observation);
            let obs = core::mem::replace(&mut cursor.obs, next_obs);
            let actor_hidden = core::mem::replace(&mut cursor.actor_hidden, choice.next_hidden);
            let critic_hidden = core::mem::replace(&mut cursor.critic_hidden, critic_next);
            buffer.push(Transition {
                observation: obs,
                action: choice.index,
                log_prob: choice.log_prob,
                value: value[0],
                reward: step.reward,
                actor_hidden,
                critic_hidden,
                los_epoch: step.info.los_epoch,
            })?;
        }
        let (bootstrap, _) = self.critic.step(&cursor.obs, &cursor.critic_hidden);
        buffer.finish(bootstrap[0], self.hp.gamma, self.hp.gae_lambda)
    }

    /// Trains for `total_steps / batch_size` iterations on the stream that
    /// starts at `env.reset(seed)`. `on_batch` sees each metric row as soon as
    /// it is produced; the full trace is also returned.
    pub fn train<E, F>(&mut self, env: &mut E, seed: u64, mut on_batch: F) -> Result<Vec<BatchMetrics>>
    where
        E: Environment + ?Sized,
        F: FnMut(&BatchMetrics) -> Result<()>,
    {
        self.hp.validate()?;
        if env.num_actions() != self.num_actions() {
            return Err(Error::ShapeMismatch {
                expected: vec![self.num_actions()],
                got: vec![env.num_actions()],
            });
        }
        let mut policy_rng = substream(seed, Stream::Policy);
        let mut shuffle_rng = substream(seed, Stream::Shuffle);
        let mut cursor = self.start_stream(env, seed)?;
        let mut buffer = RolloutBuffer::new(self.hp.batch_size);
        let mut trace = Vec::new();
        for batch in 0..self.hp.num_batches() {
            self.collect(env, &mut cursor, &mut buffer, &mut policy_rng)?;
            let diag = self.ppo_update(&buffer, &mut shuffle_rng)?;
            let (mean_reward, _) = mean_std(&buffer.rewards());
            let row = BatchMetrics {
                step: (batch + 1) * self.hp.batch_size as u64,
                batch,
                mean_reward,
                entropy: diag.entropy,
                actor_loss: diag.actor_loss,
                critic_loss: diag.critic_loss,
                clip_fraction: diag.clip_fraction,
            };
            on_batch(&row)?;
            trace.push(row);
        }
        Ok(trace)
    }

    /// Deterministic evaluation policy with frozen normalization statistics.
    pub fn greedy_policy(&self) -> GreedyPolicy<N> {
        GreedyPolicy {
            hidden: self.actor.initial_hidden(),
            actor: self.actor.clone(),
            normalizer: self.normalizer.clone(),
        }
    }
}

/// Position inside a continuing rollout: the next (normalized) observation
/// and the recurrent states the networks will see with it.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutCursor<H> {
    pub obs: Observation,
    pub actor_hidden: H,
    pub critic_hidden: H,
}

fn standardized(raw: &[f64], a: &[f64]) -> bool {
    let (raw_mean, raw_std) = mean_std(raw);
    let (mean, std) = mean_std(a);
    if raw_std < super::normalizer::STD_FLOOR {
        return a.iter().zip(raw).all(|(x, r)| (x * super::normalizer::STD_FLOOR - (r - raw_mean)).abs() < 1e-12);
    }
    mean.abs() < 1e-9 && (std - 1.0).abs() < 1e-9
}

/// Argmax policy carrying its own recurrent state.
#[derive(Debug, Clone)]
pub struct GreedyPolicy<N: SequenceNet> {
    actor: N,
    normalizer: RunningNormalizer,
    hidden: N::Hidden,
}

impl<N: SequenceNet> Policy for GreedyPolicy<N> {
    fn reset(&mut self) {
        self.hidden = self.actor.initial_hidden();
    }

    fn act(&mut self, observation: &Observation) -> usize {
        let obs = self.normalizer.normalize_frozen(observation);
        let choice = greedy_action(&self.actor, &obs, &self.hidden);
        self.hidden = choice.next_hidden;
        choice.index
    }
}
