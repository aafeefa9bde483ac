//! Adam over flat parameter vectors.

use serde::{Deserialize, Serialize};

use super::dense::{DenseNet, NetGrads};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 3e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        Self { m: vec![0.0; num_params], v: vec![0.0; num_params], step: 0 }
    }
}

/// One bias-corrected Adam step, applied in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() || params.len() != state.v.len() {
        return Err(Error::Shape(format!(
            "adam: {} params, {} grads, state of {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Divergence(format!("non-finite gradient at parameter {i}")));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

/// Adam bound to one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetOptimizer {
    pub config: AdamConfig,
    pub state: AdamState,
}

impl NetOptimizer {
    pub fn new(net: &DenseNet, config: AdamConfig) -> Self {
        Self { config, state: AdamState::new(net.num_params()) }
    }

    pub fn step(&mut self, net: &mut DenseNet, grads: &NetGrads) -> Result<()> {
        let mut params = net.params_to_vec();
        adam_step(&mut params, &grads.to_vec(), &mut self.state, &self.config)?;
        net.set_params_from_slice(&params)
    }
}

/// Rescales `grads` so its global L2 norm is at most `max_norm`.
pub fn clip_grad_norm(grads: &mut NetGrads, max_norm: f64) {
    let norm = grads.norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_first_step_is_noop() {
        let mut p = vec![1.5, -2.0];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut s, &AdamConfig::default()).unwrap();
        assert_eq!(p, vec![1.5, -2.0]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_is_lr_over_one_plus_eps() {
        // m_hat = v_hat = g^2 = 1 after bias correction.
        let cfg = AdamConfig::with_lr(1e-3);
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        adam_step(&mut p, &[1.0], &mut s, &cfg).unwrap();
        let expected = -1e-3 * (1.0 / (1.0 + 1e-8));
        assert!((p[0] - expected).abs() < 1e-18, "{}", p[0]);
    }

    #[test]
    fn repeated_gradient_moves_monotonically() {
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        let cfg = AdamConfig::default();
        adam_step(&mut p, &[2.0], &mut s, &cfg).unwrap();
        let after_one = p[0];
        adam_step(&mut p, &[2.0], &mut s, &cfg).unwrap();
        assert!(after_one < 0.0 && p[0] < after_one);
    }

    #[test]
    fn non_finite_gradient_is_divergence() {
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        let err = adam_step(&mut p, &[f64::NAN], &mut s, &AdamConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Divergence(_)));
        assert_eq!(s.step, 0);
    }
}
