//! Policy-environment interaction.

use rand::{Rng, RngCore};

use super::{EnvSpec, Environment};
use crate::datasets::TransitionRecord;
use crate::rngs::{stream_rng, Stream};
use crate::{Error, Result};

/// Anything that maps a state to an action.
pub trait Actor {
    fn act(&self, state: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>>;
}

/// Always outputs the zero action.
#[derive(Debug, Clone, Copy)]
pub struct ZeroActor {
    pub action_dim: usize,
}

impl Actor for ZeroActor {
    fn act(&self, _state: &[f64], _rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        Ok(vec![0.0; self.action_dim])
    }
}

/// Samples each action coordinate uniformly inside the bounds.
#[derive(Debug, Clone)]
pub struct UniformRandomActor {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl UniformRandomActor {
    pub fn for_env(spec: &EnvSpec) -> Self {
        Self { low: spec.action_low.clone(), high: spec.action_high.clone() }
    }
}

impl Actor for UniformRandomActor {
    fn act(&self, _state: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        Ok(self.low.iter().zip(&self.high).map(|(&lo, &hi)| rng.random_range(lo..=hi)).collect())
    }
}

fn checked_action(actor: &dyn Actor, state: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
    let action = actor.act(state, rng)?;
    if action.iter().any(|a| !a.is_finite()) {
        return Err(Error::Rollout(format!("policy produced non-finite action {action:?} at state {state:?}")));
    }
    Ok(action)
}

/// Runs one full episode. The recorded action is the actor's raw output;
/// the environment clips it before applying.
pub fn rollout_episode(
    actor: &dyn Actor,
    env: &mut dyn Environment,
    episode_id: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<TransitionRecord>> {
    let mut state = env.reset(rng);
    let mut out = Vec::with_capacity(env.spec().horizon);
    for t in 0..env.spec().horizon {
        let action = checked_action(actor, &state, rng)?;
        let step = env.step(&action)?;
        out.push(TransitionRecord {
            s: state,
            a: action,
            r: Some(step.reward),
            s_next: step.next_state.clone(),
            episode_id,
            t,
        });
        state = step.next_state;
        if step.done {
            break;
        }
    }
    Ok(out)
}

/// One episode, fully determined by `seed` and the actor's parameters.
pub fn rollout(actor: &dyn Actor, env: &mut dyn Environment, seed: u64) -> Result<Vec<TransitionRecord>> {
    let mut rng = stream_rng(seed, Stream::Policy);
    rollout_episode(actor, env, 0, &mut rng)
}

/// Collects exactly `n_steps` transitions, starting fresh episodes as
/// needed. The final episode may be cut short; callers detect that from
/// `t + 1 < horizon` on the last record.
pub fn collect_steps(
    actor: &dyn Actor,
    env: &mut dyn Environment,
    n_steps: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<TransitionRecord>> {
    let horizon = env.spec().horizon;
    let mut out = Vec::with_capacity(n_steps);
    let mut episode_id = 0;
    while out.len() < n_steps {
        let mut state = env.reset(rng);
        for t in 0..horizon {
            if out.len() == n_steps {
                break;
            }
            let action = checked_action(actor, &state, rng)?;
            let step = env.step(&action)?;
            out.push(TransitionRecord {
                s: state,
                a: action,
                r: Some(step.reward),
                s_next: step.next_state.clone(),
                episode_id,
                t,
            });
            state = step.next_state;
        }
        episode_id += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::PointMass2D;

    struct NanActor;
    impl Actor for NanActor {
        fn act(&self, _: &[f64], _: &mut dyn RngCore) -> Result<Vec<f64>> {
            Ok(vec![f64::NAN, 0.0])
        }
    }

    #[test]
    fn short_horizon_chains_states() {
        let mut env = PointMass2D::with_horizon(3);
        let traj = rollout(&UniformRandomActor::for_env(env.spec()), &mut env, 4).unwrap();
        assert_eq!(traj.len(), 3);
        for w in traj.windows(2) {
            assert_eq!(w[0].s_next, w[1].s);
        }
    }

    #[test]
    fn zero_policy_never_moves() {
        let mut env = PointMass2D::new();
        let traj = rollout(&ZeroActor { action_dim: 2 }, &mut env, 9).unwrap();
        let start = &traj[0].s;
        assert!(traj.iter().all(|r| &r.s_next == start));
    }

    #[test]
    fn rollouts_are_reproducible() {
        let mut env = PointMass2D::new();
        let actor = UniformRandomActor::for_env(env.spec());
        let a = rollout(&actor, &mut env, 21).unwrap();
        let b = rollout(&actor, &mut env, 21).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_policy_output_is_rollout_error() {
        let mut env = PointMass2D::new();
        assert!(matches!(rollout(&NanActor, &mut env, 0), Err(Error::Rollout(_))));
    }

    #[test]
    fn collect_steps_returns_exact_count() {
        let mut env = PointMass2D::with_horizon(10);
        let mut rng = stream_rng(0, Stream::Policy);
        let steps = collect_steps(&ZeroActor { action_dim: 2 }, &mut env, 25, &mut rng).unwrap();
        assert_eq!(steps.len(), 25);
        assert_eq!(steps.last().unwrap().episode_id, 2);
        assert_eq!(steps.last().unwrap().t, 4);
    }
}
