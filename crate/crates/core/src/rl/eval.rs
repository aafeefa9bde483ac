use serde::{Deserialize, Serialize};

use super::policy::{DeterministicActor, GaussianPolicy};
use crate::envs::{rollout_episode, Environment};
use crate::rngs::{stream_rng, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean: f64,
    pub std: f64,
    pub returns: Vec<f64>,
}

impl EvalReport {
    pub fn from_returns(returns: Vec<f64>) -> Self {
        // Shift by the first return so identical returns give an exact zero spread.
        let n = returns.len().max(1) as f64;
        let shift = returns.first().copied().unwrap_or(0.0);
        let mean_d = returns.iter().map(|r| r - shift).sum::<f64>() / n;
        let var = returns.iter().map(|r| (r - shift - mean_d).powi(2)).sum::<f64>() / n;
        Self { mean: shift + mean_d, std: var.sqrt(), returns }
    }
}

/// Undiscounted returns of the mean action over `episodes` resets drawn
/// from the environment stream of `seed`. `std` is the population
/// standard deviation.
pub fn evaluate(policy: &GaussianPolicy, env: &mut dyn Environment, episodes: usize, seed: u64) -> Result<EvalReport> {
    if episodes == 0 {
        return Err(Error::Config("evaluation needs at least one episode".into()));
    }
    let mut rng = stream_rng(seed, Stream::Env);
    let actor = DeterministicActor(policy);
    let mut returns = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        let traj = rollout_episode(&actor, env, ep, &mut rng)?;
        returns.push(traj.iter().map(|r| r.r.unwrap_or(0.0)).sum());
    }
    Ok(EvalReport::from_returns(returns))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{EnvSpec, StepOutcome};
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Fixed start, reward equal to the first action coordinate.
    struct Fixed {
        spec: EnvSpec,
        t: usize,
    }

    impl Environment for Fixed {
        fn spec(&self) -> &EnvSpec {
            &self.spec
        }
        fn reset(&mut self, _rng: &mut dyn RngCore) -> Vec<f64> {
            self.t = 0;
            vec![0.5, 0.5]
        }
        fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
            self.t += 1;
            Ok(StepOutcome { next_state: vec![0.5, 0.5], reward: action[0], done: self.t == self.spec.horizon })
        }
    }

    fn fixed() -> Fixed {
        Fixed {
            spec: EnvSpec {
                name: "fixed".into(),
                state_dim: 2,
                action_dim: 1,
                horizon: 4,
                gamma: 0.9,
                action_low: vec![-10.0],
                action_high: vec![10.0],
            },
            t: 0,
        }
    }

    #[test]
    fn deterministic_setting_has_zero_spread() {
        let p = GaussianPolicy::new(2, 1, &[3], 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let rep = evaluate(&p, &mut fixed(), 5, 1).unwrap();
        assert_eq!(rep.std, 0.0);
        let one = evaluate(&p, &mut fixed(), 1, 1).unwrap();
        assert_eq!(one.mean, one.returns[0]);
        let expect = 4.0 * p.mean_one(&[0.5, 0.5]).unwrap()[0];
        assert!((one.mean - expect).abs() < 1e-12);
        assert!(evaluate(&p, &mut fixed(), 0, 1).is_err());
    }
}
