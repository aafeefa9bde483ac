//! Adversarial imitation on raw `(s, s')` pairs.

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::eval::evaluate;
use super::ppo::{completed_episode_returns, PpoAgent, PpoConfig, PpoStats};
use crate::datasets::{rows_to_matrix, sample_one, DemoBuffer, TransitionRecord};
use crate::envs::Environment;
use crate::nn::loss::{bce_with_logits, threshold_accuracy};
use crate::nn::{AdamConfig, DenseNet, HeadKind, NetOptimizer};
use crate::rngs::{stream_rng, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GailConfig {
    pub iterations: usize,
    /// Imitator steps per iteration; also the discriminator batch size.
    pub batch_size: usize,
    pub disc_updates: usize,
    pub disc_lr: f64,
    pub disc_hidden: Vec<usize>,
    /// Deterministic evaluation every this many iterations; 0 disables.
    pub eval_every: usize,
    pub eval_episodes: usize,
}

impl Default for GailConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            batch_size: 2048,
            disc_updates: 1,
            disc_lr: 3e-4,
            disc_hidden: vec![128, 128],
            eval_every: 0,
            eval_episodes: 10,
        }
    }
}

impl GailConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.batch_size == 0 || self.disc_updates == 0 {
            return Err(Error::Config("gail: iterations, batch_size and disc_updates must be positive".into()));
        }
        if !(self.disc_lr > 0.0) || self.disc_hidden.contains(&0) {
            return Err(Error::Config("gail: disc_lr and disc_hidden widths must be positive".into()));
        }
        if self.eval_every > 0 && self.eval_episodes == 0 {
            return Err(Error::Config("gail: eval_episodes must be positive when evaluating".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GailIter {
    pub iteration: usize,
    pub mean_return: f64,
    pub mean_reward: f64,
    pub disc_loss: f64,
    pub disc_accuracy: f64,
    pub ppo: PpoStats,
    pub eval_return: Option<f64>,
}

pub struct GailOutcome {
    pub agent: PpoAgent,
    pub discriminator: DenseNet,
    pub history: Vec<GailIter>,
}

/// `[s | s']` rows.
pub fn pair_matrix(states: ArrayView2<f64>, next_states: ArrayView2<f64>) -> Array2<f64> {
    concatenate![Axis(1), states, next_states]
}

pub fn record_pairs(records: &[TransitionRecord], state_dim: usize) -> Array2<f64> {
    let s = rows_to_matrix(records.iter().map(|r| r.s.as_slice()), state_dim);
    let s2 = rows_to_matrix(records.iter().map(|r| r.s_next.as_slice()), state_dim);
    pair_matrix(s.view(), s2.view())
}

/// One Adam step of a sigmoid classifier on binary cross-entropy.
/// Returns the loss and accuracy of the predictions made before the step.
pub fn discriminator_step(
    net: &mut DenseNet,
    opt: &mut NetOptimizer,
    inputs: ArrayView2<f64>,
    labels: &[f64],
) -> Result<(f64, f64)> {
    let (probs, cache) = net.forward(inputs)?;
    let (loss, grad) = bce_with_logits(cache.pre_head().view(), labels);
    if !loss.is_finite() {
        return Err(Error::Divergence(format!("discriminator loss {loss}")));
    }
    let acc = threshold_accuracy(&probs.column(0).to_vec(), labels);
    let (grads, _) = net.backward_pre_head(&cache, grad.view())?;
    opt.step(net, &grads)?;
    Ok((loss, acc))
}

pub fn gail_train(
    env: &mut dyn Environment,
    expert: &DemoBuffer,
    config: &GailConfig,
    ppo: &PpoConfig,
    seed: u64,
    mut on_iter: impl FnMut(&GailIter, &PpoAgent) -> Result<()>,
) -> Result<GailOutcome> {
    config.validate()?;
    if expert.is_empty() {
        return Err(Error::Input("GAIL needs a nonempty expert buffer".into()));
    }
    let spec = env.spec().clone();
    if expert.state_dim != spec.state_dim {
        return Err(Error::Shape(format!(
            "expert states have {} dims, env has {}",
            expert.state_dim, spec.state_dim
        )));
    }
    let mut init_rng = stream_rng(seed, Stream::Init);
    let mut roll_rng = stream_rng(seed, Stream::Policy);
    let mut sgd_rng = stream_rng(seed, Stream::Sampler);
    let mut agent = PpoAgent::new(spec.state_dim, spec.action_dim, ppo.clone(), &mut init_rng)?;
    let mut disc = DenseNet::new(2 * spec.state_dim, &config.disc_hidden, 1, HeadKind::Sigmoid, 0.0, &mut init_rng)?;
    let mut disc_opt = NetOptimizer::new(&disc, AdamConfig::with_lr(config.disc_lr));
    let n = config.batch_size;
    let n_expert = n.min(expert.len());
    let mut history = Vec::with_capacity(config.iterations);

    for iteration in 0..config.iterations {
        let records = agent.collect(env, n, &mut roll_rng)?;
        let imitator_pairs = record_pairs(&records, spec.state_dim);
        let rewards: Vec<f64> = disc.predict(imitator_pairs.view())?.column(0).to_vec();
        let true_rewards: Vec<f64> = records.iter().map(|r| r.r.unwrap_or(0.0)).collect();

        let mut disc_loss = 0.0;
        let mut disc_accuracy = 0.0;
        for _ in 0..config.disc_updates {
            let eb = sample_one(expert, n_expert, &mut sgd_rng)?;
            let expert_pairs = pair_matrix(eb.states.view(), eb.next_states.view());
            let inputs = concatenate![Axis(0), expert_pairs, imitator_pairs];
            let labels: Vec<f64> = (0..inputs.nrows()).map(|i| if i < n_expert { 1.0 } else { 0.0 }).collect();
            let (l, a) = discriminator_step(&mut disc, &mut disc_opt, inputs.view(), &labels)?;
            disc_loss = l;
            disc_accuracy = a;
        }

        let ppo = agent.update(&records, &rewards, spec.horizon, &mut sgd_rng)?;
        let finished = completed_episode_returns(&records, &true_rewards, spec.horizon);
        let eval_return = if config.eval_every > 0 && (iteration + 1) % config.eval_every == 0 {
            Some(evaluate(&agent.policy, env, config.eval_episodes, seed.wrapping_add(iteration as u64))?.mean)
        } else {
            None
        };
        let log = GailIter {
            iteration,
            mean_return: mean_or_nan(&finished),
            mean_reward: rewards.iter().sum::<f64>() / rewards.len() as f64,
            disc_loss,
            disc_accuracy,
            ppo,
            eval_return,
        };
        on_iter(&log, &agent)?;
        history.push(log);
    }
    Ok(GailOutcome { agent, discriminator: disc, history })
}

pub(crate) fn mean_or_nan(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}
