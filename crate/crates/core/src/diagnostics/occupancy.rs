//! Discounted occupancy measures on tabular MDPs.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;

use crate::envs::tabular::{check_permutation, TabularMdp, STOCHASTIC_TOL};
use crate::{Error, Result};

/// Largest state count solved by dense LU; bigger MDPs use fixed-point iteration.
pub const DIRECT_SOLVE_MAX_STATES: usize = 64;
pub const POWER_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyTable {
    /// `ρ(s, a)`, `S × A`, summing to one.
    pub rho: Array2<f64>,
    pub gamma: f64,
    pub policy: Array2<f64>,
    /// Max-norm residual of the state-visitation fixed point.
    pub residual: f64,
}

impl OccupancyTable {
    pub fn total(&self) -> f64 {
        self.rho.sum()
    }
}

fn check_policy(mdp: &TabularMdp, policy: &Array2<f64>) -> Result<()> {
    if policy.dim() != (mdp.states(), mdp.actions()) {
        return Err(Error::Input(format!(
            "policy is {:?}, MDP has {} states and {} actions",
            policy.dim(),
            mdp.states(),
            mdp.actions()
        )));
    }
    for (s, row) in policy.rows().into_iter().enumerate() {
        let sum: f64 = row.sum();
        if row.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::Input(format!("policy row {s} is not a distribution (sum {sum})")));
        }
    }
    Ok(())
}

/// `P_π[s, s'] = Σ_a π(a|s) P(s'|s, a)`.
fn state_kernel(mdp: &TabularMdp, policy: &Array2<f64>) -> DMatrix<f64> {
    let n = mdp.states();
    DMatrix::from_fn(n, n, |s, s2| (0..mdp.actions()).map(|a| policy[[s, a]] * mdp.transition(s, a, s2)).sum())
}

/// One application of `d ↦ (1−γ) p0 + γ P_πᵀ d`.
fn bellman_flow(kernel: &DMatrix<f64>, p0: &DVector<f64>, gamma: f64, d: &DVector<f64>) -> DVector<f64> {
    p0 * (1.0 - gamma) + kernel.tr_mul(d) * gamma
}

/// Solves the discounted state-visitation fixed point to max-norm residual
/// below `tol`, then sets `ρ(s, a) = d(s) π(a|s)`.
pub fn occupancy_measure(mdp: &TabularMdp, policy: &Array2<f64>, tol: f64) -> Result<OccupancyTable> {
    check_policy(mdp, policy)?;
    let n = mdp.states();
    let gamma = mdp.gamma();
    let kernel = state_kernel(mdp, policy);
    let p0 = DVector::from_column_slice(mdp.initial());
    let residual_of = |d: &DVector<f64>| (bellman_flow(&kernel, &p0, gamma, d) - d).amax();

    let d = if n <= DIRECT_SOLVE_MAX_STATES {
        let system = DMatrix::<f64>::identity(n, n) - kernel.transpose() * gamma;
        system
            .lu()
            .solve(&(&p0 * (1.0 - gamma)))
            .ok_or_else(|| Error::Input("occupancy system is singular".into()))?
    } else {
        let mut d = p0.clone();
        let mut iterations = 0;
        while residual_of(&d) >= tol {
            if iterations == POWER_MAX_ITER {
                return Err(Error::Convergence { iterations, deviation: residual_of(&d) });
            }
            d = bellman_flow(&kernel, &p0, gamma, &d);
            iterations += 1;
        }
        d
    };
    let residual = residual_of(&d);
    if !(residual < tol) {
        return Err(Error::Convergence { iterations: 0, deviation: residual });
    }
    let rho = Array2::from_shape_fn((n, mdp.actions()), |(s, a)| d[s] * policy[[s, a]]);
    Ok(OccupancyTable { rho, gamma, policy: policy.clone(), residual })
}

/// Truncated forward propagation `Σ_{t<T} (1−γ) γ^t P(s_t = s) π(a|s)`.
/// The omitted tail has total mass `γ^T`, which is returned as the bound.
pub fn truncated_occupancy(mdp: &TabularMdp, policy: &Array2<f64>, horizon: usize) -> Result<(Array2<f64>, f64)> {
    check_policy(mdp, policy)?;
    let (n, m) = (mdp.states(), mdp.actions());
    let gamma = mdp.gamma();
    let mut dist = mdp.initial().to_vec();
    let mut visit = vec![0.0; n];
    let mut weight = 1.0 - gamma;
    for _ in 0..horizon {
        for s in 0..n {
            visit[s] += weight * dist[s];
        }
        let mut next = vec![0.0; n];
        for s in 0..n {
            if dist[s] == 0.0 {
                continue;
            }
            for a in 0..m {
                let mass = dist[s] * policy[[s, a]];
                if mass == 0.0 {
                    continue;
                }
                for (s2, p) in mdp.next_distribution(s, a).iter().enumerate() {
                    next[s2] += mass * p;
                }
            }
        }
        dist = next;
        weight *= gamma;
    }
    let rho = Array2::from_shape_fn((n, m), |(s, a)| visit[s] * policy[[s, a]]);
    Ok((rho, gamma.powi(horizon as i32)))
}

/// `max_{s,a} |ρ(s, a) − ρ̃(perm[s], a)|`, where `ρ̃` is the occupancy of the
/// relabeled MDP under `π̃(a | perm[s]) = π(a | s)`.
pub fn verify_relabeling_invariance(mdp: &TabularMdp, policy: &Array2<f64>, perm: &[usize], tol: f64) -> Result<f64> {
    check_permutation(perm, mdp.states())?;
    let relabeled = mdp.relabel(perm)?;
    let mut moved = Array2::zeros(policy.raw_dim());
    for (s, &t) in perm.iter().enumerate() {
        moved.row_mut(t).assign(&policy.row(s));
    }
    let rho = occupancy_measure(mdp, policy, tol)?.rho;
    let rho_tilde = occupancy_measure(&relabeled, &moved, tol)?.rho;
    let mut diff: f64 = 0.0;
    for (s, &t) in perm.iter().enumerate() {
        for a in 0..mdp.actions() {
            diff = diff.max((rho[[s, a]] - rho_tilde[[t, a]]).abs());
        }
    }
    Ok(diff)
}

/// Uniformly random row-stochastic policy with strictly positive entries.
pub fn random_policy(states: usize, actions: usize, rng: &mut dyn rand::RngCore) -> Array2<f64> {
    use rand::Rng;
    let mut p = Array2::from_shape_fn((states, actions), |_| rng.random_range(0.01..1.0));
    for mut row in p.rows_mut() {
        let total = row.sum();
        row.mapv_inplace(|x| x / total);
    }
    p
}
