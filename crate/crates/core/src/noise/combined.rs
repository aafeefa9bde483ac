//! Four operator families applied to a balanced random split of episodes.

use rand::seq::SliceRandom;
use rand::RngCore;

use super::{corrupt_with, LtiNoise, NoiseKind, StateNoise};
use crate::datasets::DemoBuffer;
use crate::rngs::{stream_rng, Stream};
use crate::{Error, Result};

/// Part `j` of the combined operator; fixed order.
pub fn combined_kinds(gaussian: NoiseKind) -> [NoiseKind; 4] {
    [gaussian, NoiseKind::Normal, NoiseKind::DoublyStochastic, NoiseKind::Shuffle]
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedNoise {
    parts: Vec<LtiNoise>,
    /// `assignment[k]` is the part used for the k-th episode of the buffer.
    assignment: Vec<usize>,
    seed: Option<u64>,
}

impl CombinedNoise {
    /// Sample the four operators, then deal `episodes` into four groups
    /// whose sizes differ by at most one.
    pub fn sample(gaussian: NoiseKind, dim: usize, episodes: usize, rng: &mut dyn RngCore) -> Result<Self> {
        if !matches!(gaussian, NoiseKind::Gaussian { .. }) {
            return Err(Error::Config(format!("combined noise needs gaussian parameters, got {gaussian}")));
        }
        let parts = combined_kinds(gaussian)
            .into_iter()
            .map(|k| LtiNoise::sample(k, dim, rng))
            .collect::<Result<Vec<_>>>()?;
        let mut order: Vec<usize> = (0..episodes).collect();
        order.shuffle(rng);
        let mut assignment = vec![0; episodes];
        for (slot, &ep) in order.iter().enumerate() {
            assignment[ep] = slot % parts.len();
        }
        Ok(Self { parts, assignment, seed: None })
    }

    pub fn sample_seeded(gaussian: NoiseKind, dim: usize, episodes: usize, seed: u64) -> Result<Self> {
        let mut rng = stream_rng(seed, Stream::Noise);
        let mut op = Self::sample(gaussian, dim, episodes, &mut rng)?;
        op.seed = Some(seed);
        Ok(op)
    }

    pub fn from_parts(parts: Vec<LtiNoise>, assignment: Vec<usize>, seed: Option<u64>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::Input("combined noise needs at least one part".into()));
        }
        let dim = parts[0].dim();
        if parts.iter().any(|p| p.dim() != dim) {
            return Err(Error::Shape("combined noise parts differ in dimension".into()));
        }
        if let Some(&bad) = assignment.iter().find(|&&j| j >= parts.len()) {
            return Err(Error::Input(format!("assignment refers to part {bad} of {}", parts.len())));
        }
        Ok(Self { parts, assignment, seed })
    }

    pub fn parts(&self) -> &[LtiNoise] {
        &self.parts
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Episode ordinals grouped by part.
    pub fn partition(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.parts.len()];
        for (ep, &j) in self.assignment.iter().enumerate() {
            groups[j].push(ep);
        }
        groups
    }
}

impl StateNoise for CombinedNoise {
    fn dim(&self) -> usize {
        self.parts[0].dim()
    }

    fn corrupt(&self, buffer: &DemoBuffer) -> Result<DemoBuffer> {
        let episodes = buffer.num_episodes();
        if episodes != self.assignment.len() {
            return Err(Error::Shape(format!(
                "combined noise was partitioned for {} episodes, buffer has {episodes}",
                self.assignment.len()
            )));
        }
        corrupt_with(buffer, |ordinal| &self.parts[self.assignment[ordinal]])
    }
}
