//! Diagonal Gaussian policy with a state-independent log-std.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::envs::Actor;
use crate::nn::{DenseNet, ForwardCache, HeadKind, NetGrads};
use crate::{Error, Result};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    net: DenseNet,
}

impl GaussianPolicy {
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        init_log_std: f64,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        let net = DenseNet::new(state_dim, hidden, action_dim, HeadKind::GaussianPolicy, init_log_std, rng)?;
        Ok(Self { net })
    }

    pub fn from_net(net: DenseNet) -> Result<Self> {
        if net.head() != HeadKind::GaussianPolicy {
            return Err(Error::Config(format!("policy network needs a gaussian head, got {:?}", net.head())));
        }
        Ok(Self { net })
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut DenseNet {
        &mut self.net
    }

    pub fn into_net(self) -> DenseNet {
        self.net
    }

    pub fn state_dim(&self) -> usize {
        self.net.in_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.net.out_dim()
    }

    pub fn log_std(&self) -> &Array1<f64> {
        self.net.log_std().expect("gaussian head always carries log-std")
    }

    pub fn mean(&self, states: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.net.predict(states)
    }

    pub fn forward(&self, states: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.net.forward(states)
    }

    pub fn mean_one(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.net.predict_one(state)
    }

    /// `mean + std ⊙ ξ` with `ξ ~ N(0, I)`.
    pub fn sample(&self, state: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let mean = self.mean_one(state)?;
        Ok(mean
            .iter()
            .zip(self.log_std().iter())
            .map(|(m, ls)| {
                let z: f64 = rng.sample(StandardNormal);
                m + ls.exp() * z
            })
            .collect())
    }

    pub fn log_probs(&self, states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Result<Array1<f64>> {
        let mean = self.mean(states)?;
        log_prob_rows(mean.view(), self.log_std(), actions)
    }

    pub fn entropy(&self) -> f64 {
        self.log_std().iter().map(|ls| ls + 0.5 + HALF_LN_2PI).sum()
    }

    /// Gradient of `Σ_i w_i log π(a_i | s_i)` with respect to every
    /// parameter, given the forward pass that produced `mean`.
    pub fn weighted_log_prob_grads(
        &self,
        cache: &ForwardCache,
        mean: ArrayView2<f64>,
        actions: ArrayView2<f64>,
        weights: &[f64],
    ) -> Result<NetGrads> {
        if mean.dim() != actions.dim() || weights.len() != mean.nrows() {
            return Err(Error::Shape(format!(
                "mean {:?}, actions {:?}, {} weights",
                mean.dim(),
                actions.dim(),
                weights.len()
            )));
        }
        let log_std = self.log_std();
        let inv_var = log_std.mapv(|ls| (-2.0 * ls).exp());
        let mut grad_mean = Array2::zeros(mean.dim());
        let mut grad_log_std = Array1::zeros(log_std.len());
        for (i, &w) in weights.iter().enumerate() {
            for j in 0..mean.ncols() {
                let d = actions[[i, j]] - mean[[i, j]];
                grad_mean[[i, j]] = w * d * inv_var[j];
                grad_log_std[j] += w * (d * d * inv_var[j] - 1.0);
            }
        }
        let (mut grads, _) = self.net.backward(cache, grad_mean.view())?;
        grads.log_std = Some(grad_log_std);
        Ok(grads)
    }

    pub fn clamp_log_std(&mut self) {
        if let Some(ls) = self.net.log_std_mut() {
            ls.mapv_inplace(|x| x.clamp(LOG_STD_MIN, LOG_STD_MAX));
        }
    }
}

pub fn log_prob_rows(mean: ArrayView2<f64>, log_std: &Array1<f64>, actions: ArrayView2<f64>) -> Result<Array1<f64>> {
    if mean.dim() != actions.dim() || mean.ncols() != log_std.len() {
        return Err(Error::Shape(format!("mean {:?} vs actions {:?}", mean.dim(), actions.dim())));
    }
    let mut out = Array1::zeros(mean.nrows());
    for (i, (m, a)) in mean.axis_iter(Axis(0)).zip(actions.axis_iter(Axis(0))).enumerate() {
        out[i] = m
            .iter()
            .zip(a.iter())
            .zip(log_std.iter())
            .map(|((m, a), ls)| {
                let z = (a - m) * (-ls).exp();
                -0.5 * z * z - ls - HALF_LN_2PI
            })
            .sum();
    }
    Ok(out)
}

/// Samples from the policy.
pub struct StochasticActor<'a>(pub &'a GaussianPolicy);

/// Always plays the policy mean.
pub struct DeterministicActor<'a>(pub &'a GaussianPolicy);

impl Actor for StochasticActor<'_> {
    fn act(&self, state: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        self.0.sample(state, rng)
    }
}

impl Actor for DeterministicActor<'_> {
    fn act(&self, state: &[f64], _rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        self.0.mean_one(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::check_gradient;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn log_prob_matches_closed_form() {
        let mean = array![[0.0, 1.0]];
        let log_std = array![0.0, (2.0f64).ln()];
        let actions = array![[1.0, 1.0]];
        let lp = log_prob_rows(mean.view(), &log_std, actions.view()).unwrap()[0];
        let oracle = -0.5 - (2.0 * std::f64::consts::PI).ln() - (2.0f64).ln();
        assert!((lp - oracle).abs() < 1e-14);
    }

    #[test]
    fn entropy_of_unit_gaussian() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = GaussianPolicy::new(3, 2, &[4], 0.0, &mut rng).unwrap();
        let oracle = (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((p.entropy() - oracle).abs() < 1e-14);
    }

    #[test]
    fn sample_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = GaussianPolicy::new(2, 1, &[3], (0.5f64).ln(), &mut rng).unwrap();
        let s = [0.3, -0.2];
        let m = p.mean_one(&s).unwrap()[0];
        let xs: Vec<f64> = (0..20_000).map(|_| p.sample(&s, &mut rng).unwrap()[0]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
        assert!((mean - m).abs() < 4.0 * 0.5 / (xs.len() as f64).sqrt());
        assert!((sd - 0.5).abs() < 0.01);
    }

    #[test]
    fn log_prob_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = GaussianPolicy::new(3, 2, &[5, 4], -0.3, &mut rng).unwrap();
        let states = array![[0.1, -0.4, 0.9], [1.2, 0.3, -0.5], [0.0, 0.2, 0.1]];
        let actions = array![[0.5, -1.0], [0.0, 0.3], [-0.7, 0.2]];
        let weights = [0.7, -1.3, 0.4];
        let (mean, cache) = p.forward(states.view()).unwrap();
        let analytic = p.weighted_log_prob_grads(&cache, mean.view(), actions.view(), &weights).unwrap().to_vec();
        let params = p.net().params_to_vec();
        let report = check_gradient(&params, &analytic, 1e-5, |theta| {
            let mut q = p.clone();
            q.net_mut().set_params_from_slice(theta).unwrap();
            let lp = q.log_probs(states.view(), actions.view()).unwrap();
            lp.iter().zip(&weights).map(|(l, w)| l * w).sum()
        });
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }

    #[test]
    fn clamp_bounds_log_std() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = GaussianPolicy::new(1, 2, &[2], 0.0, &mut rng).unwrap();
        p.net_mut().log_std_mut().unwrap().assign(&array![-9.0, 4.0]);
        p.clamp_log_std();
        assert_eq!(p.log_std(), &array![LOG_STD_MIN, LOG_STD_MAX]);
    }
}
