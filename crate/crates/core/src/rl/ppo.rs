//! Clipped-surrogate PPO with a separate value network.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::policy::{log_prob_rows, GaussianPolicy, StochasticActor};
use super::returns::{normalize_in_place, rollout_targets, ReturnMode};
use crate::datasets::{rows_to_matrix, TransitionRecord};
use crate::envs::{collect_steps, Environment};
use crate::nn::{clip_grad_norm, mse, AdamConfig, DenseNet, HeadKind, NetOptimizer};
use crate::rngs::{stream_rng, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub clip: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub gamma: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub policy_lr: f64,
    pub value_lr: f64,
    /// Epochs stop early once the mean KL to the rollout policy exceeds this.
    pub max_kl: f64,
    pub max_grad_norm: Option<f64>,
    pub returns: ReturnMode,
    pub normalize_advantages: bool,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
    /// Environment steps per iteration when PPO runs on its own.
    pub steps_per_iter: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            epochs: 10,
            minibatch: 256,
            gamma: 0.99,
            value_coef: 0.5,
            entropy_coef: 0.0,
            policy_lr: 3e-4,
            value_lr: 1e-3,
            max_kl: 0.05,
            max_grad_norm: Some(0.5),
            returns: ReturnMode::RewardToGo,
            normalize_advantages: true,
            hidden: vec![128, 128],
            init_log_std: -0.5,
            steps_per_iter: 2048,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return bad(format!("ppo clip must lie in (0, 1), got {}", self.clip));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1), got {}", self.gamma));
        }
        if self.epochs == 0 || self.minibatch == 0 || self.steps_per_iter == 0 {
            return bad("ppo epochs, minibatch and steps_per_iter must be positive".into());
        }
        if !(self.policy_lr > 0.0 && self.value_lr > 0.0) {
            return bad("learning rates must be positive".into());
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        if let ReturnMode::Gae { lambda } = self.returns {
            if !(0.0..=1.0).contains(&lambda) {
                return bad(format!("gae lambda must lie in [0, 1], got {lambda}"));
            }
        }
        if self.max_grad_norm.is_some_and(|g| !(g > 0.0)) || !(self.max_kl > 0.0) {
            return bad("max_grad_norm and max_kl must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub entropy: f64,
    pub epochs_run: usize,
}

/// Policy, value net and their optimizers.
#[derive(Debug, Clone)]
pub struct PpoAgent {
    pub policy: GaussianPolicy,
    pub value: DenseNet,
    pub policy_opt: NetOptimizer,
    pub value_opt: NetOptimizer,
    pub config: PpoConfig,
}

impl PpoAgent {
    pub fn new(state_dim: usize, action_dim: usize, config: PpoConfig, rng: &mut dyn RngCore) -> Result<Self> {
        config.validate()?;
        let policy = GaussianPolicy::new(state_dim, action_dim, &config.hidden, config.init_log_std, rng)?;
        let value = DenseNet::new(state_dim, &config.hidden, 1, HeadKind::Linear, 0.0, rng)?;
        Ok(Self::from_parts(policy, value, config))
    }

    pub fn from_parts(policy: GaussianPolicy, value: DenseNet, config: PpoConfig) -> Self {
        let policy_opt = NetOptimizer::new(policy.net(), AdamConfig::with_lr(config.policy_lr));
        let value_opt = NetOptimizer::new(&value, AdamConfig::with_lr(config.value_lr));
        Self { policy, value, policy_opt, value_opt, config }
    }

    /// Exactly `n` on-policy steps with stochastic actions.
    pub fn collect(&self, env: &mut dyn Environment, n: usize, rng: &mut dyn RngCore) -> Result<Vec<TransitionRecord>> {
        collect_steps(&StochasticActor(&self.policy), env, n, rng)
    }

    /// Build targets from `rewards` (one per record) and run one PPO update.
    pub fn update(
        &mut self,
        records: &[TransitionRecord],
        rewards: &[f64],
        horizon: usize,
        rng: &mut dyn RngCore,
    ) -> Result<PpoStats> {
        if records.is_empty() {
            return Err(Error::Input("ppo update on an empty rollout".into()));
        }
        let dim = self.policy.state_dim();
        let states = rows_to_matrix(records.iter().map(|r| r.s.as_slice()), dim);
        let next_states = rows_to_matrix(records.iter().map(|r| r.s_next.as_slice()), dim);
        let actions = rows_to_matrix(records.iter().map(|r| r.a.as_slice()), self.policy.action_dim());
        let values = column(self.value.predict(states.view())?);
        let next_values = column(self.value.predict(next_states.view())?);
        let (returns, mut adv) = rollout_targets(
            records,
            rewards,
            &values,
            &next_values,
            horizon,
            self.config.gamma,
            self.config.returns,
        )?;
        if self.config.normalize_advantages {
            normalize_in_place(&mut adv);
        }
        ppo_update(self, states.view(), actions.view(), &returns, &adv, rng)
    }
}

fn column(a: Array2<f64>) -> Vec<f64> {
    a.column(0).to_vec()
}

/// Clipped-surrogate policy steps and squared-error value steps over
/// shuffled minibatches.
pub fn ppo_update(
    agent: &mut PpoAgent,
    states: ArrayView2<f64>,
    actions: ArrayView2<f64>,
    returns: &[f64],
    advantages: &[f64],
    rng: &mut dyn RngCore,
) -> Result<PpoStats> {
    let n = states.nrows();
    if actions.nrows() != n || returns.len() != n || advantages.len() != n {
        return Err(Error::Shape(format!(
            "ppo batch: {n} states, {} actions, {} returns, {} advantages",
            actions.nrows(),
            returns.len(),
            advantages.len()
        )));
    }
    let cfg = agent.config.clone();
    let old_logp = agent.policy.log_probs(states, actions)?;
    let mut order: Vec<usize> = (0..n).collect();
    let mut stats = PpoStats::default();
    let mut n_batches = 0usize;
    let mut clipped = 0usize;
    for _epoch in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch) {
            let s = states.select(Axis(0), chunk);
            let a = actions.select(Axis(0), chunk);
            let m = chunk.len() as f64;

            let (mean, cache) = agent.policy.forward(s.view())?;
            let logp = log_prob_rows(mean.view(), agent.policy.log_std(), a.view())?;
            let mut weights = vec![0.0; chunk.len()];
            let mut surrogate = 0.0;
            for (k, &i) in chunk.iter().enumerate() {
                let ratio = (logp[k] - old_logp[i]).exp();
                let adv = advantages[i];
                let unclipped = ratio * adv;
                let bounded = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
                if unclipped <= bounded {
                    surrogate += unclipped;
                    weights[k] = -unclipped / m;
                } else {
                    surrogate += bounded;
                    clipped += 1;
                }
            }
            let policy_loss = -surrogate / m - cfg.entropy_coef * agent.policy.entropy();
            if !policy_loss.is_finite() {
                return Err(Error::Divergence(format!("non-finite policy loss {policy_loss}")));
            }
            let mut pg = agent.policy.weighted_log_prob_grads(&cache, mean.view(), a.view(), &weights)?;
            if cfg.entropy_coef != 0.0 {
                if let Some(ls) = pg.log_std.as_mut() {
                    ls.mapv_inplace(|g| g - cfg.entropy_coef);
                }
            }
            if let Some(max) = cfg.max_grad_norm {
                clip_grad_norm(&mut pg, max);
            }
            agent.policy_opt.step(agent.policy.net_mut(), &pg)?;
            agent.policy.clamp_log_std();

            let targets: Vec<f64> = chunk.iter().map(|&i| returns[i]).collect();
            let (v, vcache) = agent.value.forward(s.view())?;
            let (value_loss, mut vgrad_out) = mse(v.view(), &targets);
            if !value_loss.is_finite() {
                return Err(Error::Divergence(format!("non-finite value loss {value_loss}")));
            }
            vgrad_out.mapv_inplace(|g| g * cfg.value_coef);
            let (mut vg, _) = agent.value.backward(&vcache, vgrad_out.view())?;
            if let Some(max) = cfg.max_grad_norm {
                clip_grad_norm(&mut vg, max);
            }
            agent.value_opt.step(&mut agent.value, &vg)?;

            stats.policy_loss += policy_loss;
            stats.value_loss += value_loss;
            n_batches += 1;
        }
        stats.epochs_run += 1;
        let new_logp = agent.policy.log_probs(states, actions)?;
        stats.approx_kl = approx_kl(&old_logp, &new_logp);
        if stats.approx_kl > cfg.max_kl {
            break;
        }
    }
    let nb = n_batches.max(1) as f64;
    stats.policy_loss /= nb;
    stats.value_loss /= nb;
    stats.clip_fraction = clipped as f64 / (n_batches.max(1) as f64 * cfg.minibatch.min(n) as f64);
    stats.entropy = agent.policy.entropy();
    Ok(stats)
}

/// Mean of `(r − 1) − ln r` with `r = π_new / π_old`; nonnegative.
pub fn approx_kl(old_logp: &Array1<f64>, new_logp: &Array1<f64>) -> f64 {
    let n = old_logp.len().max(1) as f64;
    old_logp
        .iter()
        .zip(new_logp.iter())
        .map(|(o, nw)| {
            let log_r = nw - o;
            log_r.exp_m1() - log_r
        })
        .sum::<f64>()
        / n
}

/// Undiscounted returns of the episodes in `records` that reached the
/// horizon.
pub fn completed_episode_returns(records: &[TransitionRecord], rewards: &[f64], horizon: usize) -> Vec<f64> {
    super::returns::episode_segments(records)
        .into_iter()
        .filter(|seg| records[seg.end - 1].t + 1 >= horizon)
        .map(|seg| rewards[seg].iter().sum())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoIterLog {
    pub iteration: usize,
    pub mean_return: f64,
    pub stats: PpoStats,
}

/// Plain PPO on the environment reward. Network init, rollouts and
/// minibatch order each use their own stream of `seed`.
pub fn train_ppo(
    env: &mut dyn Environment,
    config: PpoConfig,
    iterations: usize,
    seed: u64,
    mut on_iter: impl FnMut(&PpoIterLog, &PpoAgent) -> Result<()>,
) -> Result<PpoAgent> {
    let spec = env.spec().clone();
    let mut init_rng = stream_rng(seed, Stream::Init);
    let mut roll_rng = stream_rng(seed, Stream::Policy);
    let mut sgd_rng = stream_rng(seed, Stream::Sampler);
    let mut agent = PpoAgent::new(spec.state_dim, spec.action_dim, config, &mut init_rng)?;
    for iteration in 0..iterations {
        let records = agent.collect(env, agent.config.steps_per_iter, &mut roll_rng)?;
        let rewards: Vec<f64> = records
            .iter()
            .map(|r| r.r.ok_or_else(|| Error::Rollout("rollout record lacks a reward".into())))
            .collect::<Result<_>>()?;
        let stats = agent.update(&records, &rewards, spec.horizon, &mut sgd_rng)?;
        let finished = completed_episode_returns(&records, &rewards, spec.horizon);
        let mean_return = if finished.is_empty() { f64::NAN } else { finished.iter().sum::<f64>() / finished.len() as f64 };
        on_iter(&PpoIterLog { iteration, mean_return, stats }, &agent)?;
    }
    Ok(agent)
}
