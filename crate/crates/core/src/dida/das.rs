//! Confusion-weighted replacement of anchor pairs by imitator pairs.

use ndarray::{Array2, ArrayView2};
use rand::seq::index;
use rand::{Rng, RngCore};

use crate::{Error, Result};

/// Where a row of the mixed batch came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Anchor(usize),
    Imitator(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DasMix {
    pub mixed: Array2<f64>,
    pub provenance: Vec<Slot>,
}

impl DasMix {
    pub fn imitator_count(&self) -> usize {
        self.provenance.iter().filter(|s| matches!(s, Slot::Imitator(_))).count()
    }
}

/// `k` distinct indices drawn by successive weighted sampling without
/// replacement (Efraimidis–Spirakis keys `ln(u) / w`). Zero-weight items
/// are taken only after every positive-weight item, uniformly among
/// themselves.
pub fn weighted_sample_without_replacement(weights: &[f64], k: usize, rng: &mut dyn RngCore) -> Result<Vec<usize>> {
    if k > weights.len() {
        return Err(Error::Sampling(format!("cannot draw {k} of {} items without replacement", weights.len())));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::Sampling("weights must be finite and nonnegative".into()));
    }
    let mut keyed: Vec<(f64, f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u: f64 = 1.0 - rng.random::<f64>();
            let tiebreak: f64 = rng.random();
            let key = if w > 0.0 { u.ln() / w } else { f64::NEG_INFINITY };
            (key, tiebreak, i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
    Ok(keyed.into_iter().take(k).map(|(_, _, i)| i).collect())
}

/// `k` independent categorical draws.
pub fn weighted_sample_with_replacement(weights: &[f64], k: usize, rng: &mut dyn RngCore) -> Result<Vec<usize>> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || !(total > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::Sampling("weights must be nonnegative with positive total".into()));
    }
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cumulative.push(acc);
    }
    Ok((0..k)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            cumulative.partition_point(|&c| c <= u).min(weights.len() - 1)
        })
        .collect())
}

/// Copy `anchor` and overwrite `round(α N)` uniformly chosen rows with
/// imitator rows drawn according to `p_das`.
pub fn das_mix(
    anchor: ArrayView2<f64>,
    imitator: ArrayView2<f64>,
    alpha: f64,
    p_das: &[f64],
    with_replacement: bool,
    rng: &mut dyn RngCore,
) -> Result<DasMix> {
    let n = anchor.nrows();
    if imitator.dim() != anchor.dim() || p_das.len() != n {
        return Err(Error::Shape(format!(
            "anchor {:?}, imitator {:?}, {} weights",
            anchor.dim(),
            imitator.dim(),
            p_das.len()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Input(format!("alpha {alpha} outside [0, 1]")));
    }
    let k = (alpha * n as f64).round() as usize;
    let picks = if with_replacement {
        weighted_sample_with_replacement(p_das, k, rng)?
    } else {
        weighted_sample_without_replacement(p_das, k, rng)?
    };
    let slots = index::sample(rng, n, k).into_vec();
    let mut mixed = anchor.to_owned();
    let mut provenance: Vec<Slot> = (0..n).map(Slot::Anchor).collect();
    for (&slot, &src) in slots.iter().zip(&picks) {
        mixed.row_mut(slot).assign(&imitator.row(src));
        provenance[slot] = Slot::Imitator(src);
    }
    Ok(DasMix { mixed, provenance })
}
