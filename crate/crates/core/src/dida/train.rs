//! The outer training loop.

use ndarray::{concatenate, s, Axis};
use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::branches::{encoder_gradients, noise_branch_update, policy_branch_update, Blocks, DidaNets, NoiseBranch};
use super::config::{Ablations, DidaConfig};
use super::das::das_mix;
use super::formulas::{adaptive_rate, confusion_distribution, domain_weight};
use crate::datasets::{rows_to_matrix, DemoBuffer, StateBatch};
use crate::envs::Environment;
use crate::nn::{AdamConfig, NetOptimizer};
use crate::rl::{completed_episode_returns, evaluate, PpoAgent, PpoConfig};
use crate::rngs::{stream_rng, Stream, StreamState};
use crate::{Error, Result};

/// Telemetry for one outer iteration; one metrics line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterState {
    /// 1-based iteration index.
    pub i: usize,
    pub p_acc: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub loss_n: f64,
    pub loss_p: f64,
    /// Environment return averaged over the rollout's completed episodes.
    pub mean_return: Option<f64>,
    /// Mean policy-discriminator reward handed to PPO.
    pub mean_reward: f64,
    /// Imitator rows placed into the mixed batch.
    pub mixed_imitators: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_return: Option<f64>,
}

/// Full mutable state of a run, advanced one iteration at a time.
pub struct DidaTrainer {
    pub config: DidaConfig,
    pub ablations: Ablations,
    pub nets: DidaNets,
    pub agent: PpoAgent,
    encoder_opt: NetOptimizer,
    noise_opt: NetOptimizer,
    policy_opt: NetOptimizer,
    seed: u64,
    rollout_rng: ChaCha8Rng,
    sampler_rng: ChaCha8Rng,
    iteration: usize,
}

pub struct DidaOutcome {
    pub trainer: DidaTrainer,
    pub history: Vec<IterState>,
}

impl DidaTrainer {
    /// Networks come from the init stream of `seed`, rollouts from the policy
    /// stream and every batch draw or shuffle from the sampler stream.
    pub fn new(config: DidaConfig, ablations: Ablations, ppo: PpoConfig, state_dim: usize, action_dim: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        ablations.validate()?;
        let mut init_rng = stream_rng(seed, Stream::Init);
        let embed_dim = config.embed_dim.unwrap_or(state_dim);
        let nets = DidaNets::new(state_dim, embed_dim, &config.hidden, config.bias_init, &mut init_rng)?;
        let agent = PpoAgent::new(state_dim, action_dim, ppo, &mut init_rng)?;
        Ok(Self {
            encoder_opt: NetOptimizer::new(&nets.encoder, AdamConfig::with_lr(config.encoder_lr)),
            noise_opt: NetOptimizer::new(&nets.noise_disc, AdamConfig::with_lr(config.noise_disc_lr)),
            policy_opt: NetOptimizer::new(&nets.policy_disc, AdamConfig::with_lr(config.policy_disc_lr)),
            config,
            ablations,
            nets,
            agent,
            seed,
            rollout_rng: stream_rng(seed, Stream::Policy),
            sampler_rng: stream_rng(seed, Stream::Sampler),
            iteration: 0,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_states(&self) -> Vec<StreamState> {
        vec![
            StreamState::capture(self.seed, Stream::Policy, &self.rollout_rng),
            StreamState::capture(self.seed, Stream::Sampler, &self.sampler_rng),
        ]
    }

    fn tent_peak(&self) -> f64 {
        self.ablations.sar_p.unwrap_or(self.config.p)
    }

    /// One outer iteration. `expert` is the noisy expert buffer and
    /// `anchor` the aligned anchor buffer.
    pub fn step(&mut self, env: &mut dyn Environment, expert: &DemoBuffer, anchor: &DemoBuffer) -> Result<IterState> {
        let spec = env.spec().clone();
        check_inputs(expert, anchor, spec.state_dim, self.nets.encoder.in_dim())?;
        let cfg = self.config.clone();
        self.iteration += 1;
        let i = self.iteration;
        let n_steps = cfg.batch_size;
        let n = n_steps.min(expert.len());

        // Aligned expert/anchor rows share one index set.
        let shared = index::sample(&mut self.sampler_rng, expert.len(), n).into_vec();
        let eb = StateBatch::gather(expert, shared.clone())?;
        let ab = StateBatch::gather(anchor, shared)?;

        let records = self.agent.collect(env, n_steps, &mut self.rollout_rng)?;
        let dim = spec.state_dim;
        let s_i = rows_to_matrix(records.iter().map(|r| r.s.as_slice()), dim);
        let s_i2 = rows_to_matrix(records.iter().map(|r| r.s_next.as_slice()), dim);
        let rewards = self.nets.imitator_rewards(s_i.view(), s_i2.view())?;
        let true_rewards: Vec<f64> = records.iter().map(|r| r.r.unwrap_or(0.0)).collect();

        let own = index::sample(&mut self.sampler_rng, records.len(), n).into_vec();
        let ib_s = s_i.select(Axis(0), &own);
        let ib_s2 = s_i2.select(Axis(0), &own);

        let blocks = Blocks { n };
        let x = concatenate![Axis(0), ib_s, ib_s2, eb.states, eb.next_states, ab.states, ab.next_states];
        let (z, cache) = self.nets.encoder.forward(x.view())?;
        let block = |start: usize| z.slice(s![start..start + n, ..]);
        let (z_i, z_e, z_a) = (block(blocks.imitator()), block(blocks.expert()), block(blocks.anchor()));

        let mut noise: Option<NoiseBranch> = None;
        for _ in 0..cfg.noise_updates {
            let nb = noise_branch_update(&self.nets.noise_disc, z_i, z_e, z_a)?;
            if !nb.loss.is_finite() {
                return Err(self.diverged(i, "noise discriminator loss", nb.loss));
            }
            self.noise_opt.step(&mut self.nets.noise_disc, &nb.disc_grads)?;
            noise = Some(nb);
        }
        let noise = noise.expect("noise_updates >= 1 is validated");

        let alpha = if self.ablations.no_sar {
            cfg.alpha_clip.1
        } else {
            adaptive_rate(noise.p_acc, self.tent_peak(), cfg.alpha_clip)
        };
        let lambda = domain_weight(i.min(cfg.iterations), cfg.iterations, cfg.lambda0)?;

        let p_das = if self.ablations.uses_confusion_weights() {
            let probs = self.nets.noise_disc.predict(z_i)?.column(0).to_vec();
            confusion_distribution(&probs, cfg.confusion_clip)?
        } else {
            vec![1.0 / n as f64; n]
        };
        let sigma_i = concatenate![Axis(1), z_i, block(blocks.imitator_next())];
        let sigma_e = concatenate![Axis(1), z_e, block(blocks.expert_next())];
        let sigma_a = concatenate![Axis(1), z_a, block(blocks.anchor_next())];
        let mix = das_mix(sigma_a.view(), sigma_i.view(), alpha, &p_das, cfg.das_with_replacement, &mut self.sampler_rng)?;

        let policy = policy_branch_update(&self.nets.policy_disc, sigma_e.view(), mix.mixed.view())?;
        if !policy.loss.is_finite() {
            return Err(self.diverged(i, "policy discriminator loss", policy.loss));
        }
        self.policy_opt.step(&mut self.nets.policy_disc, &policy.disc_grads)?;

        let enc = encoder_gradients(&self.nets.encoder, &cache, blocks, &noise, &policy, &mix.provenance, lambda)?;
        if !enc.total.is_finite() {
            return Err(self.diverged(i, "encoder gradient norm", enc.total.norm()));
        }
        self.encoder_opt.step(&mut self.nets.encoder, &enc.total)?;

        self.agent.update(&records, &rewards, spec.horizon, &mut self.sampler_rng)?;

        let finished = completed_episode_returns(&records, &true_rewards, spec.horizon);
        let eval_return = if cfg.eval_every > 0 && i % cfg.eval_every == 0 {
            Some(evaluate(&self.agent.policy, env, cfg.eval_episodes, self.seed.wrapping_add(i as u64))?.mean)
        } else {
            None
        };
        Ok(IterState {
            i,
            p_acc: noise.p_acc,
            alpha,
            lambda,
            loss_n: noise.loss,
            loss_p: policy.loss,
            mean_return: (!finished.is_empty()).then(|| finished.iter().sum::<f64>() / finished.len() as f64),
            mean_reward: rewards.iter().sum::<f64>() / rewards.len() as f64,
            mixed_imitators: mix.imitator_count(),
            eval_return,
        })
    }

    fn diverged(&self, i: usize, what: &str, value: f64) -> Error {
        Error::Divergence(format!(
            "{what} is {value} at iteration {i} (seed {}, policy log-std {:?})",
            self.seed,
            self.agent.policy.log_std().to_vec()
        ))
    }
}

fn check_inputs(expert: &DemoBuffer, anchor: &DemoBuffer, env_dim: usize, net_dim: usize) -> Result<()> {
    if expert.is_empty() {
        return Err(Error::Input("training needs a nonempty expert buffer".into()));
    }
    for (name, b) in [("expert", expert), ("anchor", anchor)] {
        if b.state_dim != env_dim || b.state_dim != net_dim {
            return Err(Error::Shape(format!(
                "{name} states have {} dims, environment {env_dim}, encoder {net_dim}",
                b.state_dim
            )));
        }
    }
    if anchor.len() < expert.len() {
        return Err(Error::Input(format!(
            "anchor buffer ({}) is smaller than the expert buffer ({})",
            anchor.len(),
            expert.len()
        )));
    }
    Ok(())
}

/// Runs `config.iterations` iterations, handing each state to `on_iter`.
#[allow(clippy::too_many_arguments)]
pub fn dida_train(
    config: &DidaConfig,
    ablations: &Ablations,
    ppo: &PpoConfig,
    env: &mut dyn Environment,
    expert: &DemoBuffer,
    anchor: &DemoBuffer,
    seed: u64,
    mut on_iter: impl FnMut(&IterState, &DidaTrainer) -> Result<()>,
) -> Result<DidaOutcome> {
    let spec = env.spec().clone();
    let mut trainer =
        DidaTrainer::new(config.clone(), *ablations, ppo.clone(), spec.state_dim, spec.action_dim, seed)?;
    let mut history = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        let state = trainer.step(env, expert, anchor)?;
        on_iter(&state, &trainer)?;
        history.push(state);
    }
    Ok(DidaOutcome { trainer, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{anchor_shuffle, Expertise, NoiseLevel};
    use crate::envs::{collect_steps, PointMass2D, UniformRandomActor};
    use rand::SeedableRng;

    fn buffers() -> (DemoBuffer, DemoBuffer) {
        let mut env = PointMass2D::with_horizon(20);
        let actor = UniformRandomActor::for_env(env.spec());
        let records = collect_steps(&actor, &mut env, 200, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let expert = DemoBuffer::new(records, Expertise::Expert, NoiseLevel::Noisy, 4, 2, 20).unwrap();
        let anchor = anchor_shuffle(&expert, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        (expert, anchor)
    }

    fn small(iterations: usize) -> (DidaConfig, PpoConfig) {
        let cfg = DidaConfig { iterations, batch_size: 64, hidden: vec![8], noise_updates: 2, ..DidaConfig::default() };
        let ppo = PpoConfig { hidden: vec![8], minibatch: 32, epochs: 2, ..PpoConfig::default() };
        (cfg, ppo)
    }

    fn run(cfg: &DidaConfig, ab: &Ablations, ppo: &PpoConfig, seed: u64) -> Vec<IterState> {
        let (expert, anchor) = buffers();
        let mut env = PointMass2D::with_horizon(20);
        dida_train(cfg, ab, ppo, &mut env, &expert, &anchor, seed, |_, _| Ok(())).unwrap().history
    }

    fn finite(s: &IterState) -> bool {
        [s.p_acc, s.alpha, s.lambda, s.loss_n, s.loss_p, s.mean_reward].iter().all(|v| v.is_finite())
            && s.mean_return.is_none_or(f64::is_finite)
    }

    #[test]
    fn single_iteration_smoke() {
        let (cfg, ppo) = small(1);
        let h = run(&cfg, &Ablations::default(), &ppo, 0);
        assert_eq!(h.len(), 1);
        assert_eq!(h[0].i, 1);
        assert!(finite(&h[0]), "{:?}", h[0]);
    }

    #[test]
    fn telemetry_invariants_hold() {
        let (cfg, ppo) = small(4);
        for s in run(&cfg, &Ablations::default(), &ppo, 1) {
            assert!(finite(&s));
            assert!((0.0..=1.0).contains(&s.p_acc));
            assert!(s.alpha >= cfg.alpha_clip.0 && s.alpha <= cfg.alpha_clip.1);
            assert!(s.lambda >= 0.0 && s.lambda < cfg.lambda0);
            assert_eq!(s.mixed_imitators, (s.alpha * 64.0).round() as usize);
            assert!(s.mean_reward > 0.0 && s.mean_reward < 1.0);
        }
    }

    #[test]
    fn runs_are_bit_reproducible() {
        let (cfg, ppo) = small(3);
        let a = run(&cfg, &Ablations::default(), &ppo, 7);
        let b = run(&cfg, &Ablations::default(), &ppo, 7);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = run(&cfg, &Ablations::default(), &ppo, 8);
        assert_ne!(a, c);
    }

    #[test]
    fn no_sar_pins_alpha_at_the_upper_clip() {
        let (cfg, ppo) = small(2);
        let ab = Ablations { no_sar: true, ..Ablations::default() };
        for s in run(&cfg, &ab, &ppo, 2) {
            assert_eq!(s.alpha, 0.99);
            assert_eq!(s.mixed_imitators, 63);
        }
    }

    #[test]
    fn eval_is_scheduled() {
        let (mut cfg, ppo) = small(2);
        cfg.eval_every = 2;
        cfg.eval_episodes = 1;
        let h = run(&cfg, &Ablations::default(), &ppo, 3);
        assert!(h[0].eval_return.is_none() && h[1].eval_return.is_some());
    }

    #[test]
    fn short_anchor_is_rejected() {
        let (expert, _) = buffers();
        let short = DemoBuffer::new(expert.records[..20].to_vec(), Expertise::Random, NoiseLevel::Noisy, 4, 2, 20).unwrap();
        let (cfg, ppo) = small(1);
        let mut env = PointMass2D::with_horizon(20);
        let r = dida_train(&cfg, &Ablations::default(), &ppo, &mut env, &expert, &short, 0, |_, _| Ok(()));
        assert!(matches!(r, Err(Error::Input(_))));
    }

    #[test]
    fn metrics_line_omits_absent_eval() {
        let s = IterState {
            i: 1,
            p_acc: 0.5,
            alpha: 0.75,
            lambda: 0.0,
            loss_n: 0.7,
            loss_p: 0.7,
            mean_return: None,
            mean_reward: 0.5,
            mixed_imitators: 3,
            eval_return: None,
        };
        let line = serde_json::to_string(&s).unwrap();
        assert!(!line.contains("eval_return"));
        assert_eq!(serde_json::from_str::<IterState>(&line).unwrap(), s);
    }
}
