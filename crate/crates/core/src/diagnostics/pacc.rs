//! Noise-discriminator accuracy of freshly initialized networks.

use ndarray::Axis;
use serde::{Deserialize, Serialize};

use crate::datasets::{rows_to_matrix, sample_batch, DemoBuffer, Expertise, NoiseLevel};
use crate::dida::{noise_branch_update, Ablations, DidaConfig, DidaTrainer};
use crate::envs::Environment;
use crate::rl::PpoConfig;
use crate::rngs::{stream_rng, Stream};
use crate::{Error, Result};

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaccHistogram {
    /// Counts over `[k/B, (k+1)/B)`, the last bin closed.
    pub counts: Vec<usize>,
    pub values: Vec<f64>,
}

impl PaccHistogram {
    pub fn from_values(values: Vec<f64>, bins: usize) -> Self {
        let mut counts = vec![0; bins];
        for v in &values {
            counts[((v * bins as f64) as usize).min(bins - 1)] += 1;
        }
        Self { counts, values }
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) / self.counts.len() as f64
    }

    /// Centers of the two most populated bins, lower bin first on ties,
    /// returned in increasing order.
    pub fn top_two_centers(&self) -> (f64, f64) {
        let mut order: Vec<usize> = (0..self.counts.len()).collect();
        order.sort_by(|&a, &b| self.counts[b].cmp(&self.counts[a]).then(a.cmp(&b)));
        let (a, b) = (self.bin_center(order[0]), self.bin_center(order[1]));
        (a.min(b), a.max(b))
    }

    /// Fraction of values within `radius` of any of `centers`.
    pub fn concentration(&self, centers: &[f64], radius: f64) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        let hits = self.values.iter().filter(|v| centers.iter().any(|c| (*v - c).abs() <= radius)).count();
        hits as f64 / self.values.len() as f64
    }
}

/// Initial `p_acc` of one freshly initialized run: the networks and policy
/// that `DidaTrainer` would build for `seed`, one rollout of `batch_size`
/// steps and one aligned batch.
pub fn initial_p_acc(
    env: &mut dyn Environment,
    expert: &DemoBuffer,
    anchor: &DemoBuffer,
    config: &DidaConfig,
    ppo: &PpoConfig,
    seed: u64,
) -> Result<f64> {
    let spec = env.spec().clone();
    let trainer = DidaTrainer::new(config.clone(), Ablations::default(), ppo.clone(), spec.state_dim, spec.action_dim, seed)?;
    let records = trainer.agent.collect(env, config.batch_size, &mut stream_rng(seed, Stream::Policy))?;
    let imitator = DemoBuffer::new(records, Expertise::Random, NoiseLevel::Pure, spec.state_dim, spec.action_dim, spec.horizon)?;
    let n = config.batch_size.min(expert.len());
    let batch = sample_batch(expert, anchor, &imitator, n, &mut stream_rng(seed, Stream::Sampler))?;
    let enc = &trainer.nets.encoder;
    let z_i = enc.predict(batch.imitator.states.view())?;
    let z_e = enc.predict(batch.expert.states.view())?;
    let z_a = enc.predict(batch.anchor.states.view())?;
    Ok(noise_branch_update(&trainer.nets.noise_disc, z_i.view(), z_e.view(), z_a.view())?.p_acc)
}

/// [`initial_p_acc`] over `trials` consecutive seeds starting at `seed`.
pub fn pacc_init_stat(
    env: &mut dyn Environment,
    expert: &DemoBuffer,
    anchor: &DemoBuffer,
    config: &DidaConfig,
    ppo: &PpoConfig,
    trials: usize,
    seed: u64,
) -> Result<PaccHistogram> {
    if trials == 0 {
        return Err(Error::Config("p_acc statistics need at least one trial".into()));
    }
    let values = (0..trials as u64)
        .map(|k| initial_p_acc(env, expert, anchor, config, ppo, seed.wrapping_add(k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PaccHistogram::from_values(values, HISTOGRAM_BINS))
}

/// States of `buffer` as a matrix, used by the embedding export.
pub(crate) fn buffer_states(buffer: &DemoBuffer) -> ndarray::Array2<f64> {
    let m = rows_to_matrix(buffer.records.iter().map(|r| r.s.as_slice()), buffer.state_dim);
    debug_assert_eq!(m.len_of(Axis(0)), buffer.len());
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::anchor_shuffle;
    use crate::envs::{collect_steps, PointMass2D, UniformRandomActor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn histogram_bins_and_modes() {
        let h = PaccHistogram::from_values(vec![0.0, 0.33, 0.34, 0.66, 0.67, 0.68, 1.0], 20);
        assert_eq!(h.counts.iter().sum::<usize>(), 7);
        assert_eq!(h.counts[0], 1);
        assert_eq!(h.counts[19], 1);
        assert_eq!(h.counts[6], 2);
        assert_eq!(h.counts[13], 3);
        assert_eq!(h.top_two_centers(), (0.325, 0.675));
        assert!((h.concentration(&[1.0 / 3.0, 2.0 / 3.0], 0.05) - 5.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn single_trial_yields_one_value_in_unit_interval() {
        let mut env = PointMass2D::with_horizon(20);
        let actor = UniformRandomActor::for_env(env.spec());
        let records = collect_steps(&actor, &mut env, 100, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let expert = DemoBuffer::new(records, Expertise::Expert, NoiseLevel::Noisy, 4, 2, 20).unwrap();
        let anchor = anchor_shuffle(&expert, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let cfg = DidaConfig { batch_size: 40, hidden: vec![8], ..DidaConfig::default() };
        let ppo = PpoConfig { hidden: vec![8], ..PpoConfig::default() };
        let h = pacc_init_stat(&mut env, &expert, &anchor, &cfg, &ppo, 1, 5).unwrap();
        assert_eq!(h.values.len(), 1);
        assert!((0.0..=1.0).contains(&h.values[0]));
        assert!(pacc_init_stat(&mut env, &expert, &anchor, &cfg, &ppo, 0, 5).is_err());
    }
}
