//! Demonstration corpora, domain-tagged buffers, anchor construction and
//! batch sampling.

pub mod anchor;
pub mod batch;
pub mod corpus;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use anchor::{anchor_random, anchor_shuffle};
pub use batch::{sample_batch, sample_one, StateBatch, TripleBatch};
pub use corpus::{load_buffer, save_buffer};

/// One `(s, a, r, s')` step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionRecord {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    pub s_next: Vec<f64>,
    pub episode_id: usize,
    pub t: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expertise {
    Expert,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseLevel {
    Noisy,
    Pure,
}

/// The four expertise × noise quadrants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    EN,
    RN,
    RP,
    EP,
}

impl Domain {
    pub fn of(expertise: Expertise, noise: NoiseLevel) -> Self {
        match (expertise, noise) {
            (Expertise::Expert, NoiseLevel::Noisy) => Domain::EN,
            (Expertise::Random, NoiseLevel::Noisy) => Domain::RN,
            (Expertise::Random, NoiseLevel::Pure) => Domain::RP,
            (Expertise::Expert, NoiseLevel::Pure) => Domain::EP,
        }
    }
}

/// An ordered list of transitions with its domain tags.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoBuffer {
    pub records: Vec<TransitionRecord>,
    pub expertise: Expertise,
    pub noise_level: NoiseLevel,
    pub state_dim: usize,
    pub action_dim: usize,
    pub horizon: usize,
    /// Path of the noise operator file that produced this buffer, if any.
    pub noise_spec: Option<String>,
}

impl DemoBuffer {
    pub fn new(
        records: Vec<TransitionRecord>,
        expertise: Expertise,
        noise_level: NoiseLevel,
        state_dim: usize,
        action_dim: usize,
        horizon: usize,
    ) -> Result<Self> {
        let buf = Self { records, expertise, noise_level, state_dim, action_dim, horizon, noise_spec: None };
        buf.validate()?;
        Ok(buf)
    }

    pub fn domain(&self) -> Domain {
        Domain::of(self.expertise, self.noise_level)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_episodes(&self) -> usize {
        self.episode_ids().len()
    }

    /// Distinct episode ids in order of first appearance.
    pub fn episode_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = Vec::new();
        for r in &self.records {
            if ids.last() != Some(&r.episode_id) && !ids.contains(&r.episode_id) {
                ids.push(r.episode_id);
            }
        }
        ids
    }

    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.records.iter().enumerate() {
            if r.s.len() != self.state_dim || r.s_next.len() != self.state_dim || r.a.len() != self.action_dim {
                return Err(Error::Shape(format!(
                    "record {i}: dims (s {}, a {}, s' {}) do not match buffer ({}, {})",
                    r.s.len(),
                    r.a.len(),
                    r.s_next.len(),
                    self.state_dim,
                    self.action_dim
                )));
            }
            if r.t >= self.horizon {
                return Err(Error::Input(format!("record {i}: t = {} outside [0, {})", r.t, self.horizon)));
            }
        }
        for (i, w) in self.records.windows(2).enumerate() {
            if w[0].episode_id == w[1].episode_id && w[1].t != w[0].t + 1 {
                return Err(Error::Input(format!(
                    "records {i}..{}: episode {} is not consecutive in t",
                    i + 1,
                    w[0].episode_id
                )));
            }
        }
        Ok(())
    }

    pub fn states(&self) -> Array2<f64> {
        rows_to_matrix(self.records.iter().map(|r| r.s.as_slice()), self.state_dim)
    }

    pub fn next_states(&self) -> Array2<f64> {
        rows_to_matrix(self.records.iter().map(|r| r.s_next.as_slice()), self.state_dim)
    }

    pub fn actions(&self) -> Array2<f64> {
        rows_to_matrix(self.records.iter().map(|r| r.a.as_slice()), self.action_dim)
    }

    /// Same records with new domain tags.
    pub fn retagged(mut self, expertise: Expertise, noise_level: NoiseLevel) -> Self {
        self.expertise = expertise;
        self.noise_level = noise_level;
        self
    }
}

pub(crate) fn rows_to_matrix<'a>(rows: impl Iterator<Item = &'a [f64]>, width: usize) -> Array2<f64> {
    let mut flat = Vec::new();
    let mut n = 0;
    for row in rows {
        flat.extend_from_slice(row);
        n += 1;
    }
    Array2::from_shape_vec((n, width), flat).expect("rows have uniform width")
}
