use crate::agent::{AdvantageNormalization, MlpNet, PpoAgent, PpoHyperparams, ACTOR_HEAD_SCALE};
use crate::rng::{substream, Stream};
use crate::Result;

/// PPO with feed-forward actor and critic over the concatenated observation
/// and whole-batch advantage normalization. Everything else, including the
/// entropy bonus, follows `hp`.
pub fn vanilla_ppo_agent(observation_shape: (usize, usize), num_actions: usize, hp: PpoHyperparams, seed: u64) -> Result<PpoAgent<MlpNet>> {
    hp.validate()?;
    let mut rng = substream(seed, Stream::Init);
    let input = observation_shape.0 + observation_shape.1;
    let actor = MlpNet::new(input, hp.hidden_size, num_actions, ACTOR_HEAD_SCALE, &mut rng);
    let critic = MlpNet::new(input, hp.hidden_size, 1, 1.0, &mut rng);
    PpoAgent::from_networks(actor, critic, observation_shape, hp, AdvantageNormalization::WholeBatch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::SequenceNet;
    use crate::nncore::{entropy, softmax, Parameterized};
    use crate::stubs::BanditStub;

    fn small_hp() -> PpoHyperparams {
        PpoHyperparams {
            total_steps: 64,
            batch_size: 64,
            minibatch_size: 16,
            hidden_size: 8,
            gamma: 0.1,
            gae_lambda: 0.0,
            ..PpoHyperparams::default()
        }
    }

    #[test]
    fn zeroed_head_is_uniform() {
        let mut agent = vanilla_ppo_agent((4, 2), 5, small_hp(), 1).unwrap();
        for p in agent.actor.mlp.output_layer_mut().parameters_mut() {
            p.values_mut().fill(0.0);
        }
        let (logits, _) = agent.actor.step(&BanditStub::observation(), &());
        assert!((entropy(&softmax(&logits)) - 5f64.ln()).abs() < 1e-12);
        assert!(!agent.actor.is_recurrent());
        assert_eq!(agent.advantage_normalization(), AdvantageNormalization::WholeBatch);
    }

    #[test]
    fn bandit_stub_converges() {
        let mut agent = vanilla_ppo_agent((4, 2), 3, small_hp(), 2).unwrap();
        let mut env = BanditStub::new(vec![1.0, 0.0, 0.0]);
        for i in 0..100 {
            agent.train(&mut env, 200 + i, |_| Ok(())).unwrap();
        }
        let obs = agent.normalizer.normalize_frozen(&BanditStub::observation());
        let p = softmax(&agent.actor.step(&obs, &()).0)[0];
        assert!(p > 0.9, "{p}");
    }
}
