//! GAIL return as a function of Gaussian corruption scale.

use serde::{Deserialize, Serialize};

use crate::datasets::DemoBuffer;
use crate::envs::Environment;
use crate::noise::{corrupt_buffer, LtiNoise, NoiseKind};
use crate::rl::{evaluate, gail_train, GailConfig, PpoConfig};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub sigma: f64,
    pub seed: u64,
    pub eval_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    pub fn mean_for(&self, sigma: f64) -> f64 {
        let xs: Vec<f64> = self.cells.iter().filter(|c| c.sigma == sigma).map(|c| c.eval_return).collect();
        xs.iter().sum::<f64>() / xs.len() as f64
    }

    pub fn sigmas(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.sigma) {
                out.push(c.sigma);
            }
        }
        out
    }
}

/// Trains GAIL on the pure expert corpus corrupted by Gaussian operators of
/// each scale (`σ = 0` means identity), one operator per scale drawn from
/// `noise_seed`, and evaluates each run over `eval_episodes`.
#[allow(clippy::too_many_arguments)]
pub fn gaussian_scale_sweep(
    env: &mut dyn Environment,
    pure_expert: &DemoBuffer,
    sigmas: &[f64],
    seeds: &[u64],
    config: &GailConfig,
    ppo: &PpoConfig,
    noise_seed: u64,
    eval_episodes: usize,
    mut on_cell: impl FnMut(&SweepCell),
) -> Result<SweepTable> {
    let dim = pure_expert.state_dim;
    let mut cells = Vec::with_capacity(sigmas.len() * seeds.len());
    for &sigma in sigmas {
        let op = if sigma == 0.0 {
            LtiNoise::identity(dim)
        } else {
            LtiNoise::sample_seeded(NoiseKind::Gaussian { mu: 0.0, sigma }, dim, noise_seed)?
        };
        let noisy = corrupt_buffer(pure_expert, &op)?;
        for &seed in seeds {
            let outcome = gail_train(env, &noisy, config, ppo, seed, |_, _| Ok(()))?;
            let report = evaluate(&outcome.agent.policy, env, eval_episodes, seed)?;
            let cell = SweepCell { sigma, seed, eval_return: report.mean };
            on_cell(&cell);
            cells.push(cell);
        }
    }
    Ok(SweepTable { cells })
}
