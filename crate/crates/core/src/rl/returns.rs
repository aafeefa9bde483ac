//! Discounted returns and advantages over rollout buffers.

use serde::{Deserialize, Serialize};

use crate::datasets::TransitionRecord;
use crate::{Error, Result};

/// How PPO targets are formed from a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ReturnMode {
    /// `G_t = Σ_{j≥t} γ^{j−t} r_j`, advantages `G − V`.
    RewardToGo,
    /// `G_t = Σ_{j=1}^{t} γ^j r_j` counted from the episode start.
    Cumulative,
    /// Generalized advantage estimation.
    Gae { lambda: f64 },
}

impl Default for ReturnMode {
    fn default() -> Self {
        ReturnMode::RewardToGo
    }
}

/// Reward-to-go: `G_t = r_t + γ G_{t+1}`, `G_T = r_T`.
pub fn compute_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    discounted_tail(rewards, gamma, 0.0)
}

fn discounted_tail(rewards: &[f64], gamma: f64, bootstrap: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = bootstrap;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

/// `G_t = Σ_{j=1}^{t} γ^j r_j` with 1-based `t`.
pub fn compute_cumulative_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(rewards.len());
    let mut acc = 0.0;
    let mut discount = 1.0;
    for &r in rewards {
        discount *= gamma;
        acc += discount * r;
        out.push(acc);
    }
    out
}

/// `A = G − V`, standardized to zero mean and unit variance unless the
/// batch has (numerically) no spread.
pub fn compute_advantages(returns: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    if returns.len() != values.len() {
        return Err(Error::Shape(format!("{} returns vs {} values", returns.len(), values.len())));
    }
    let mut adv: Vec<f64> = returns.iter().zip(values).map(|(g, v)| g - v).collect();
    normalize_in_place(&mut adv);
    Ok(adv)
}

/// Standardize in place; returns `false` when the spread is too small.
pub fn normalize_in_place(xs: &mut [f64]) -> bool {
    if xs.len() < 2 {
        return false;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std > 1e-12 * (1.0 + mean.abs())) {
        return false;
    }
    for x in xs.iter_mut() {
        *x = (*x - mean) / std;
    }
    true
}

/// Consecutive runs of records sharing an episode id, as index ranges.
pub fn episode_segments(records: &[TransitionRecord]) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=records.len() {
        if i == records.len() || records[i].episode_id != records[start].episode_id {
            if start < i {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}

/// Targets and (unnormalized) advantages for a rollout of whole and cut
/// episodes. A segment ending before `horizon` bootstraps from
/// `next_values` of its last record; a segment that reaches the horizon is
/// terminal.
pub fn rollout_targets(
    records: &[TransitionRecord],
    rewards: &[f64],
    values: &[f64],
    next_values: &[f64],
    horizon: usize,
    gamma: f64,
    mode: ReturnMode,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = records.len();
    if rewards.len() != n || values.len() != n || next_values.len() != n {
        return Err(Error::Shape(format!(
            "{n} records, {} rewards, {} values, {} next values",
            rewards.len(),
            values.len(),
            next_values.len()
        )));
    }
    let mut returns = vec![0.0; n];
    let mut adv = vec![0.0; n];
    for seg in episode_segments(records) {
        let last = seg.end - 1;
        let terminal = records[last].t + 1 >= horizon;
        let bootstrap = if terminal { 0.0 } else { next_values[last] };
        let r = &rewards[seg.clone()];
        match mode {
            ReturnMode::RewardToGo => {
                let g = discounted_tail(r, gamma, bootstrap);
                for (k, i) in seg.clone().enumerate() {
                    returns[i] = g[k];
                    adv[i] = g[k] - values[i];
                }
            }
            ReturnMode::Cumulative => {
                let g = compute_cumulative_returns(r, gamma);
                for (k, i) in seg.clone().enumerate() {
                    returns[i] = g[k];
                    adv[i] = g[k] - values[i];
                }
            }
            ReturnMode::Gae { lambda } => {
                let mut acc = 0.0;
                for i in seg.clone().rev() {
                    let v_next = if i == last { bootstrap } else { values[i + 1] };
                    let delta = rewards[i] + gamma * v_next - values[i];
                    acc = delta + gamma * lambda * acc;
                    adv[i] = acc;
                    returns[i] = acc + values[i];
                }
            }
        }
    }
    Ok((returns, adv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reward_to_go_examples() {
        assert_eq!(compute_returns(&[1.0, 1.0, 1.0], 0.0), vec![1.0, 1.0, 1.0]);
        let g = compute_returns(&[1.0, 1.0, 1.0], 0.9);
        // Hand recursion: G_2 = 1, G_1 = 1 + 0.9, G_0 = 1 + 0.9 * 1.9.
        let oracle = [1.0 + 0.9 * (1.0 + 0.9), 1.0 + 0.9, 1.0];
        for (a, b) in g.iter().zip(oracle) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((g[0] - 2.71).abs() < 1e-12);
        assert_eq!(compute_returns(&[0.0; 5], 0.99), vec![0.0; 5]);
    }

    #[test]
    fn cumulative_form() {
        let g = compute_cumulative_returns(&[1.0, 2.0, 3.0], 0.5);
        assert_eq!(g, vec![0.5, 0.5 + 0.25 * 2.0, 0.5 + 0.5 + 0.125 * 3.0]);
    }

    #[test]
    fn advantage_examples() {
        let g = [1.0, 2.0, 3.0];
        let mut raw = compute_advantages(&g, &g).unwrap();
        assert_eq!(raw, vec![0.0; 3]);
        raw = compute_advantages(&g, &[0.0; 3]).unwrap();
        let mut expect = g.to_vec();
        normalize_in_place(&mut expect);
        assert_eq!(raw, expect);
        assert!(compute_advantages(&g, &[0.0; 2]).is_err());
    }

    fn rec(ep: usize, t: usize) -> TransitionRecord {
        TransitionRecord { s: vec![0.0], a: vec![0.0], r: None, s_next: vec![0.0], episode_id: ep, t }
    }

    #[test]
    fn truncated_segment_bootstraps() {
        let records = vec![rec(0, 0), rec(0, 1), rec(1, 0)];
        let rewards = [1.0, 1.0, 1.0];
        let values = [0.0, 0.0, 0.0];
        let next_values = [0.0, 5.0, 10.0];
        let (g, _) =
            rollout_targets(&records, &rewards, &values, &next_values, 2, 0.5, ReturnMode::RewardToGo).unwrap();
        // Episode 0 reached the horizon: terminal. Episode 1 was cut: 1 + 0.5 * 10.
        assert_eq!(g, vec![1.5, 1.0, 6.0]);
    }

    #[test]
    fn gae_with_lambda_one_equals_reward_to_go() {
        let records = vec![rec(0, 0), rec(0, 1), rec(0, 2)];
        let rewards = [1.0, -2.0, 0.5];
        let values = [0.3, 0.1, -0.2];
        let (g1, a1) =
            rollout_targets(&records, &rewards, &values, &[0.0; 3], 3, 0.9, ReturnMode::RewardToGo).unwrap();
        let (g2, a2) =
            rollout_targets(&records, &rewards, &values, &[0.0; 3], 3, 0.9, ReturnMode::Gae { lambda: 1.0 })
                .unwrap();
        for i in 0..3 {
            assert!((g1[i] - g2[i]).abs() < 1e-12);
            assert!((a1[i] - a2[i]).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn recursion_holds_exactly(rewards in proptest::collection::vec(-10.0f64..10.0, 1..50), gamma in 0.0f64..0.999) {
            let g = compute_returns(&rewards, gamma);
            for t in 0..rewards.len() - 1 {
                prop_assert_eq!(g[t], rewards[t] + gamma * g[t + 1]);
            }
            prop_assert_eq!(g[rewards.len() - 1], rewards[rewards.len() - 1]);
        }

        #[test]
        fn normalized_moments(xs in proptest::collection::vec(-100.0f64..100.0, 2..200)) {
            let mut v = xs.clone();
            if normalize_in_place(&mut v) {
                let n = v.len() as f64;
                let mean = v.iter().sum::<f64>() / n;
                let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
                prop_assert!(mean.abs() < 1e-9);
                prop_assert!((std - 1.0).abs() < 1e-6);
            }
        }
    }
}
