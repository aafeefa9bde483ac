//! Exact finite MDPs `(P, r, γ, p0)`.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Finite MDP with dense transition tensor `P[s][a][s']`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    states: usize,
    actions: usize,
    /// Flat `S × A × S`.
    transitions: Vec<f64>,
    /// Flat `S × A`.
    rewards: Vec<f64>,
    gamma: f64,
    initial: Vec<f64>,
}

/// JSON document form: `{states, actions, P, r, gamma, p0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabularMdpDoc {
    pub states: usize,
    pub actions: usize,
    #[serde(rename = "P")]
    pub p: Vec<Vec<Vec<f64>>>,
    pub r: Vec<Vec<f64>>,
    pub gamma: f64,
    pub p0: Vec<f64>,
}

fn check_distribution(what: &str, row: &[f64]) -> Result<()> {
    if row.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::Input(format!("{what}: entries must be finite and nonnegative")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::Input(format!("{what}: sums to {sum}, expected 1")));
    }
    Ok(())
}

impl TabularMdp {
    pub fn new(
        states: usize,
        actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        gamma: f64,
        initial: Vec<f64>,
    ) -> Result<Self> {
        if states == 0 || actions == 0 {
            return Err(Error::Input("MDP needs at least one state and one action".into()));
        }
        if transitions.len() != states * actions * states || rewards.len() != states * actions || initial.len() != states
        {
            return Err(Error::Shape("MDP tensor sizes do not match (states, actions)".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Input(format!("gamma {gamma} outside [0, 1)")));
        }
        for s in 0..states {
            for a in 0..actions {
                let base = (s * actions + a) * states;
                check_distribution(&format!("P[{s}][{a}]"), &transitions[base..base + states])?;
            }
        }
        check_distribution("p0", &initial)?;
        Ok(Self { states, actions, transitions, rewards, gamma, initial })
    }

    /// Random MDP: each `P[s][a]` and `p0` is uniform noise renormalized,
    /// rewards uniform in `[-1, 1]`.
    pub fn random(states: usize, actions: usize, gamma: f64, rng: &mut dyn RngCore) -> Result<Self> {
        let mut transitions = Vec::with_capacity(states * actions * states);
        for _ in 0..states * actions {
            transitions.extend(random_distribution(states, rng));
        }
        let rewards = (0..states * actions).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let initial = random_distribution(states, rng);
        Self::new(states, actions, transitions, rewards, gamma, initial)
    }

    pub fn from_doc(doc: TabularMdpDoc) -> Result<Self> {
        let shape_ok = doc.p.len() == doc.states
            && doc.p.iter().all(|row| row.len() == doc.actions && row.iter().all(|d| d.len() == doc.states))
            && doc.r.len() == doc.states
            && doc.r.iter().all(|row| row.len() == doc.actions);
        if !shape_ok {
            return Err(Error::Shape("MDP document arrays do not match declared sizes".into()));
        }
        let transitions = doc.p.into_iter().flatten().flatten().collect();
        let rewards = doc.r.into_iter().flatten().collect();
        Self::new(doc.states, doc.actions, transitions, rewards, doc.gamma, doc.p0)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_doc(serde_json::from_str(text)?)
    }

    pub fn to_doc(&self) -> TabularMdpDoc {
        TabularMdpDoc {
            states: self.states,
            actions: self.actions,
            p: (0..self.states)
                .map(|s| (0..self.actions).map(|a| self.next_distribution(s, a).to_vec()).collect())
                .collect(),
            r: (0..self.states).map(|s| (0..self.actions).map(|a| self.reward(s, a)).collect()).collect(),
            gamma: self.gamma,
            p0: self.initial.clone(),
        }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transition(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.transitions[(s * self.actions + a) * self.states + s_next]
    }

    pub fn next_distribution(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.actions + a) * self.states;
        &self.transitions[base..base + self.states]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.actions + a]
    }

    /// Same MDP with state `s` renamed to `perm[s]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.states)?;
        let (n, m) = (self.states, self.actions);
        let mut transitions = vec![0.0; n * m * n];
        let mut rewards = vec![0.0; n * m];
        let mut initial = vec![0.0; n];
        for s in 0..n {
            initial[perm[s]] = self.initial[s];
            for a in 0..m {
                rewards[perm[s] * m + a] = self.reward(s, a);
                for s2 in 0..n {
                    transitions[(perm[s] * m + a) * n + perm[s2]] = self.transition(s, a, s2);
                }
            }
        }
        Self::new(n, m, transitions, rewards, self.gamma, initial)
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.states, self.actions, self.transitions.clone(), self.rewards.clone(), gamma, self.initial.clone())
    }
}

pub fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::Input(format!("map has {} entries for {n} states", perm.len())));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::Input(format!("state map {perm:?} is not a bijection")));
        }
    }
    Ok(())
}

/// Strictly positive random vector normalized to sum to one.
fn random_distribution(n: usize, rng: &mut dyn RngCore) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    v
}
