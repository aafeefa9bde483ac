//! Minibatch draws for the adversarial updates.

use ndarray::Array2;
use rand::seq::index;
use rand::RngCore;

use super::{rows_to_matrix, DemoBuffer};
use crate::{Error, Result};

/// States and successor states gathered at `indices` of one buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBatch {
    pub states: Array2<f64>,
    pub next_states: Array2<f64>,
    pub indices: Vec<usize>,
}

impl StateBatch {
    pub fn gather(buffer: &DemoBuffer, indices: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= buffer.len()) {
            return Err(Error::Sampling(format!("index {bad} outside buffer of {}", buffer.len())));
        }
        let states = rows_to_matrix(indices.iter().map(|&i| buffer.records[i].s.as_slice()), buffer.state_dim);
        let next_states =
            rows_to_matrix(indices.iter().map(|&i| buffer.records[i].s_next.as_slice()), buffer.state_dim);
        Ok(Self { states, next_states, indices })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripleBatch {
    pub expert: StateBatch,
    pub anchor: StateBatch,
    pub imitator: StateBatch,
}

fn draw(len: usize, n: usize, what: &str, rng: &mut dyn RngCore) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::Sampling(format!("{what}: batch size must be positive")));
    }
    if n > len {
        return Err(Error::Sampling(format!("{what}: batch size {n} exceeds buffer size {len}")));
    }
    Ok(index::sample(rng, len, n).into_vec())
}

/// `n` distinct records of one buffer.
pub fn sample_one(buffer: &DemoBuffer, n: usize, rng: &mut dyn RngCore) -> Result<StateBatch> {
    let idx = draw(buffer.len(), n, "buffer", rng)?;
    StateBatch::gather(buffer, idx)
}

/// One index set drawn over the noisy expert buffer is used for both the
/// expert and the anchor; the imitator gets its own draw.
pub fn sample_batch(
    expert: &DemoBuffer,
    anchor: &DemoBuffer,
    imitator: &DemoBuffer,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<TripleBatch> {
    if anchor.len() < expert.len() {
        return Err(Error::Sampling(format!(
            "anchor buffer ({}) is smaller than the expert buffer ({})",
            anchor.len(),
            expert.len()
        )));
    }
    let shared = draw(expert.len(), n, "expert buffer", rng)?;
    let own = draw(imitator.len(), n, "imitator buffer", rng)?;
    Ok(TripleBatch {
        expert: StateBatch::gather(expert, shared.clone())?,
        anchor: StateBatch::gather(anchor, shared)?,
        imitator: StateBatch::gather(imitator, own)?,
    })
}
