//! Behavior cloning: maximum-likelihood Gaussian policy on `(s, a)` pairs.

use ndarray::Axis;
use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::policy::{log_prob_rows, GaussianPolicy};
use crate::datasets::DemoBuffer;
use crate::nn::{AdamConfig, NetOptimizer};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BcConfig {
    pub epochs: usize,
    pub minibatch: usize,
    pub lr: f64,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
    pub holdout_frac: f64,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self { epochs: 100, minibatch: 256, lr: 1e-3, hidden: vec![128, 128], init_log_std: -0.5, holdout_frac: 0.1 }
    }
}

impl BcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.minibatch == 0 || !(0.0..1.0).contains(&self.holdout_frac) {
            return Err(Error::Config("bc: epochs and minibatch must be positive, holdout_frac in [0, 1)".into()));
        }
        if !(self.lr > 0.0) || self.hidden.contains(&0) {
            return Err(Error::Config("bc: lr and hidden widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcEpoch {
    pub epoch: usize,
    /// Mean negative log-likelihood over the whole training split after the epoch.
    pub train_loss: f64,
    pub holdout_loss: Option<f64>,
}

/// Fits `π(a | s̃)` by minibatch Adam on the negative log-likelihood.
/// A random `holdout_frac` of the records is kept out and scored per epoch.
pub fn bc_train(
    buffer: &DemoBuffer,
    config: &BcConfig,
    rng: &mut dyn RngCore,
    mut on_epoch: impl FnMut(&BcEpoch),
) -> Result<(GaussianPolicy, Vec<BcEpoch>)> {
    if buffer.is_empty() {
        return Err(Error::Input("behavior cloning needs a nonempty buffer".into()));
    }
    config.validate()?;
    let states = buffer.states();
    let actions = buffer.actions();
    let mut idx: Vec<usize> = (0..buffer.len()).collect();
    idx.shuffle(rng);
    let n_hold = (buffer.len() as f64 * config.holdout_frac).floor() as usize;
    let (hold, train) = idx.split_at(n_hold);
    let mut train = train.to_vec();

    let mut policy =
        GaussianPolicy::new(buffer.state_dim, buffer.action_dim, &config.hidden, config.init_log_std, rng)?;
    let mut opt = NetOptimizer::new(policy.net(), AdamConfig::with_lr(config.lr));
    let nll = |p: &GaussianPolicy, rows: &[usize]| -> Result<f64> {
        let lp = p.log_probs(states.select(Axis(0), rows).view(), actions.select(Axis(0), rows).view())?;
        Ok(-lp.mean().unwrap_or(0.0))
    };
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        train.shuffle(rng);
        for chunk in train.chunks(config.minibatch) {
            let s = states.select(Axis(0), chunk);
            let a = actions.select(Axis(0), chunk);
            let (mean, cache) = policy.forward(s.view())?;
            let lp = log_prob_rows(mean.view(), policy.log_std(), a.view())?;
            if lp.iter().any(|x| !x.is_finite()) {
                return Err(Error::Divergence("bc: non-finite log-likelihood".into()));
            }
            let w = vec![-1.0 / chunk.len() as f64; chunk.len()];
            let grads = policy.weighted_log_prob_grads(&cache, mean.view(), a.view(), &w)?;
            opt.step(policy.net_mut(), &grads)?;
            policy.clamp_log_std();
        }
        let record = BcEpoch {
            epoch,
            train_loss: nll(&policy, &train)?,
            holdout_loss: if hold.is_empty() { None } else { Some(nll(&policy, hold)?) },
        };
        on_epoch(&record);
        history.push(record);
    }
    Ok((policy, history))
}
