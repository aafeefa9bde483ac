//! Lightweight environments: a continuous point-mass task, exact tabular MDPs,
//! and rollout collection.

pub mod point_mass;
pub mod rollout;
pub mod tabular;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::rngs::{stream_rng, Stream};
use crate::{Error, Result};

pub use point_mass::PointMass2D;
pub use rollout::{collect_steps, rollout, rollout_episode, Actor, UniformRandomActor, ZeroActor};
pub use tabular::TabularMdp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub state_dim: usize,
    pub action_dim: usize,
    pub horizon: usize,
    pub gamma: f64,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.state_dim == 0 || self.action_dim == 0 {
            return Err(Error::Config(format!("{}: horizon and dims must be >= 1", self.name)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("{}: gamma {} outside [0, 1)", self.name, self.gamma)));
        }
        if self.action_low.len() != self.action_dim
            || self.action_high.len() != self.action_dim
            || self
                .action_low
                .iter()
                .zip(&self.action_high)
                .any(|(lo, hi)| !lo.is_finite() || !hi.is_finite() || lo > hi)
        {
            return Err(Error::Config(format!("{}: invalid action bounds", self.name)));
        }
        Ok(())
    }

    pub fn clip_action(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(a, (lo, hi))| a.clamp(*lo, *hi))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// An episodic environment with a fixed horizon.
pub trait Environment {
    fn spec(&self) -> &EnvSpec;

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome>;

    /// Resets from a dedicated seed; the same seed always gives the same state.
    fn reset_seeded(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, Stream::Env);
        self.reset(&mut rng)
    }
}

/// Builds an environment from its configuration name.
pub fn make_env(name: &str) -> Result<Box<dyn Environment + Send>> {
    match name {
        point_mass::NAME => Ok(Box::new(PointMass2D::new())),
        other => Err(Error::Config(format!("unknown environment '{other}' (known: {})", point_mass::NAME))),
    }
}
