//! Anchor buffers: noisy data with the expertise removed.

use rand::seq::SliceRandom;
use rand::RngCore;

use super::{DemoBuffer, Expertise, NoiseLevel, TransitionRecord};
use crate::envs::{rollout_episode, Environment, UniformRandomActor};
use crate::noise::{corrupt_buffer, StateNoise};
use crate::{Error, Result};

/// Permute whole `(s̃, a)` records across the entire buffer.
///
/// Record `k` of the output gets `s_next` = state of output record `k + 1`;
/// the last record wraps to record 0 so every record keeps a successor.
/// Positions are relabeled as episodes of the buffer's horizon.
pub fn anchor_shuffle(noisy_expert: &DemoBuffer, rng: &mut dyn RngCore) -> Result<DemoBuffer> {
    if noisy_expert.is_empty() {
        return Err(Error::Input("anchor_shuffle: empty buffer".into()));
    }
    if (noisy_expert.expertise, noisy_expert.noise_level) != (Expertise::Expert, NoiseLevel::Noisy) {
        return Err(Error::Input(format!(
            "anchor_shuffle expects a noisy expert buffer, got {:?}",
            noisy_expert.domain()
        )));
    }
    let n = noisy_expert.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let h = noisy_expert.horizon;
    let records = (0..n)
        .map(|k| {
            let src = &noisy_expert.records[order[k]];
            let succ = &noisy_expert.records[order[(k + 1) % n]];
            TransitionRecord {
                s: src.s.clone(),
                a: src.a.clone(),
                r: None,
                s_next: succ.s.clone(),
                episode_id: k / h,
                t: k % h,
            }
        })
        .collect();
    Ok(DemoBuffer {
        records,
        expertise: Expertise::Random,
        noise_level: NoiseLevel::Noisy,
        state_dim: noisy_expert.state_dim,
        action_dim: noisy_expert.action_dim,
        horizon: h,
        noise_spec: noisy_expert.noise_spec.clone(),
    })
}

/// Uniform-random-policy rollouts pushed through `noise`.
pub fn anchor_random(
    env: &mut dyn Environment,
    noise: &dyn StateNoise,
    episodes: usize,
    rng: &mut dyn RngCore,
) -> Result<DemoBuffer> {
    let spec = env.spec().clone();
    if noise.dim() != spec.state_dim {
        return Err(Error::Shape(format!(
            "noise dim {} does not match env state dim {}",
            noise.dim(),
            spec.state_dim
        )));
    }
    let actor = UniformRandomActor::for_env(&spec);
    let mut records = Vec::with_capacity(episodes * spec.horizon);
    for ep in 0..episodes {
        let mut episode = rollout_episode(&actor, env, ep, rng)?;
        for r in &mut episode {
            r.r = None;
        }
        records.extend(episode);
    }
    let pure = DemoBuffer::new(
        records,
        Expertise::Random,
        NoiseLevel::Pure,
        spec.state_dim,
        spec.action_dim,
        spec.horizon,
    )?;
    corrupt_buffer(&pure, noise)
}
