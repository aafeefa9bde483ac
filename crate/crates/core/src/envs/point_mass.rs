//! A 2-D point mass that must reach and settle at a goal.
//!
//! State `(x, y, vx, vy)`, action `(ax, ay)` clipped to `[-1, 1]^2`.
//! Each step: `v' = clip(v + a dt, ±2)`, `p' = p + v' dt`. The reward is
//! `-min(|p' - g|, √8) - 0.01 |a|^2`, so every step's reward lies in
//! `[-(√8 + 0.02), 0]`. Episodes last exactly `H = 100` steps.

use rand::{Rng, RngCore};

use super::{EnvSpec, Environment, StepOutcome};
use crate::{Error, Result};

pub const NAME: &str = "point-mass-2d";
pub const DT: f64 = 0.1;
pub const SPEED_CAP: f64 = 2.0;
pub const GOAL: [f64; 2] = [1.0, 1.0];
pub const START_JITTER: f64 = 0.05;
pub const HORIZON: usize = 100;
pub const ACTION_COST: f64 = 0.01;
/// Distance at which the position penalty saturates.
pub const MAX_DISTANCE: f64 = 2.0 * std::f64::consts::SQRT_2;
pub const GAMMA: f64 = 0.99;

#[derive(Debug, Clone)]
pub struct PointMass2D {
    spec: EnvSpec,
    state: [f64; 4],
    t: usize,
}

impl Default for PointMass2D {
    fn default() -> Self {
        Self::new()
    }
}

impl PointMass2D {
    pub fn new() -> Self {
        Self::with_horizon(HORIZON)
    }

    pub fn with_horizon(horizon: usize) -> Self {
        Self {
            spec: EnvSpec {
                name: NAME.to_owned(),
                state_dim: 4,
                action_dim: 2,
                horizon,
                gamma: GAMMA,
                action_low: vec![-1.0; 2],
                action_high: vec![1.0; 2],
            },
            state: [0.0; 4],
            t: 0,
        }
    }

    pub fn state(&self) -> [f64; 4] {
        self.state
    }

    pub fn steps_taken(&self) -> usize {
        self.t
    }

    /// Places the mass at an arbitrary state (used by tests and probes).
    pub fn set_state(&mut self, state: [f64; 4]) {
        self.state = state;
        self.t = 0;
    }

    /// Pure dynamics: next state and reward for `action` taken in `state`.
    pub fn transition(state: [f64; 4], action: &[f64]) -> Result<([f64; 4], f64)> {
        if action.len() != 2 {
            return Err(Error::Shape(format!("point mass expects 2 action dims, got {}", action.len())));
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::Input(format!("non-finite action {action:?}")));
        }
        let ax = action[0].clamp(-1.0, 1.0);
        let ay = action[1].clamp(-1.0, 1.0);
        let vx = (state[2] + ax * DT).clamp(-SPEED_CAP, SPEED_CAP);
        let vy = (state[3] + ay * DT).clamp(-SPEED_CAP, SPEED_CAP);
        let x = state[0] + vx * DT;
        let y = state[1] + vy * DT;
        let dist = ((x - GOAL[0]).powi(2) + (y - GOAL[1]).powi(2)).sqrt();
        let reward = -dist.min(MAX_DISTANCE) - ACTION_COST * (ax * ax + ay * ay);
        Ok(([x, y, vx, vy], reward))
    }
}

impl Environment for PointMass2D {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let x = rng.random_range(-START_JITTER..=START_JITTER);
        let y = rng.random_range(-START_JITTER..=START_JITTER);
        self.state = [x, y, 0.0, 0.0];
        self.t = 0;
        self.state.to_vec()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if self.t >= self.spec.horizon {
            return Err(Error::Input("step called on a finished episode".into()));
        }
        let (next, reward) = Self::transition(self.state, action)?;
        self.state = next;
        self.t += 1;
        Ok(StepOutcome { next_state: next.to_vec(), reward, done: self.t == self.spec.horizon })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reset_is_deterministic_and_in_support() {
        let mut env = PointMass2D::new();
        let a = env.reset_seeded(17);
        let b = env.reset_seeded(17);
        assert_eq!(a, b);
        assert!(a[0].abs() <= START_JITTER && a[1].abs() <= START_JITTER);
        assert_eq!(&a[2..], &[0.0, 0.0]);
    }

    #[test]
    fn distinct_seeds_give_distinct_starts() {
        let mut env = PointMass2D::new();
        let starts: Vec<_> = (0..100).map(|s| env.reset_seeded(s)).collect();
        let mut distinct = 0;
        for i in 0..starts.len() {
            for j in (i + 1)..starts.len() {
                if starts[i] != starts[j] {
                    distinct += 1;
                }
            }
        }
        assert_eq!(distinct, 100 * 99 / 2);
    }

    #[test]
    fn resting_with_zero_action_stays_put() {
        let s = [0.3, -0.2, 0.0, 0.0];
        let (next, r) = PointMass2D::transition(s, &[0.0, 0.0]).unwrap();
        assert_eq!(next, s);
        let expected = -((0.7f64).powi(2) + (1.2f64).powi(2)).sqrt();
        assert_eq!(r, expected);
    }

    #[test]
    fn at_goal_reward_is_zero() {
        let (_, r) = PointMass2D::transition([1.0, 1.0, 0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn hand_stepped_push() {
        let (next, _) = PointMass2D::transition([0.0; 4], &[1.0, 0.0]).unwrap();
        assert!((next[2] - 0.1).abs() < 1e-15 && next[3] == 0.0);
        assert!((next[0] - 0.01).abs() < 1e-15 && next[1] == 0.0);
    }

    #[test]
    fn non_finite_action_is_rejected() {
        assert!(matches!(PointMass2D::transition([0.0; 4], &[f64::NAN, 0.0]), Err(Error::Input(_))));
    }

    #[test]
    fn episode_ends_at_horizon() {
        let mut env = PointMass2D::with_horizon(3);
        env.reset_seeded(0);
        assert!(!env.step(&[0.0, 0.0]).unwrap().done);
        assert!(!env.step(&[0.0, 0.0]).unwrap().done);
        assert!(env.step(&[0.0, 0.0]).unwrap().done);
        assert!(env.step(&[0.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn reward_and_speed_bounds(
            x in -30.0f64..30.0, y in -30.0f64..30.0,
            vx in -2.0f64..2.0, vy in -2.0f64..2.0,
            ax in -5.0f64..5.0, ay in -5.0f64..5.0,
        ) {
            let (next, r) = PointMass2D::transition([x, y, vx, vy], &[ax, ay]).unwrap();
            prop_assert!(next.iter().all(|v| v.is_finite()));
            prop_assert!(next[2].abs() <= SPEED_CAP && next[3].abs() <= SPEED_CAP);
            prop_assert!(r <= 0.0 && r >= -(8f64.sqrt() + 0.02));
        }
    }
}
