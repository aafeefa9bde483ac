use serde::{Deserialize, Serialize};

use crate::nn::BiasInit;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DidaConfig {
    /// Peak of the adaptive-rate tent.
    pub p: f64,
    pub lambda0: f64,
    pub alpha_clip: (f64, f64),
    pub confusion_clip: (f64, f64),
    /// N: imitator steps per iteration and size of every discriminator batch.
    pub batch_size: usize,
    /// M: outer iterations.
    pub iterations: usize,
    /// k: noise-discriminator updates per iteration.
    pub noise_updates: usize,
    pub encoder_lr: f64,
    pub noise_disc_lr: f64,
    pub policy_disc_lr: f64,
    /// Hidden widths shared by the encoder and both discriminators.
    pub hidden: Vec<usize>,
    /// Embedding width; the state dimension when absent.
    pub embed_dim: Option<usize>,
    pub das_with_replacement: bool,
    /// Bias initialization of the encoder and both discriminators.
    pub bias_init: BiasInit,
    /// Deterministic evaluation every this many iterations; 0 disables.
    pub eval_every: usize,
    pub eval_episodes: usize,
}

impl Default for DidaConfig {
    fn default() -> Self {
        Self {
            p: 2.0 / 3.0,
            lambda0: 0.5,
            alpha_clip: (0.01, 0.99),
            confusion_clip: (0.1, 0.9),
            batch_size: 2048,
            iterations: 200,
            noise_updates: 5,
            encoder_lr: 3e-4,
            noise_disc_lr: 3e-4,
            policy_disc_lr: 3e-4,
            hidden: vec![128, 128],
            embed_dim: None,
            das_with_replacement: false,
            bias_init: BiasInit::FanInUniform,
            eval_every: 0,
            eval_episodes: 10,
        }
    }
}

impl DidaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.p > 0.0 && self.p < 1.0) {
            return bad(format!("p must lie strictly inside (0, 1), got {}", self.p));
        }
        for (name, (lo, hi)) in [("alpha_clip", self.alpha_clip), ("confusion_clip", self.confusion_clip)] {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return bad(format!("{name} must satisfy 0 <= lo <= hi <= 1, got [{lo}, {hi}]"));
            }
        }
        if self.confusion_clip.0 <= 0.0 {
            return bad("confusion_clip lower bound must be positive".into());
        }
        if !(self.lambda0 >= 0.0 && self.lambda0.is_finite()) {
            return bad(format!("lambda0 must be finite and nonnegative, got {}", self.lambda0));
        }
        if self.batch_size == 0 || self.iterations == 0 || self.noise_updates == 0 {
            return bad("batch_size, iterations and noise_updates must be positive".into());
        }
        if [self.encoder_lr, self.noise_disc_lr, self.policy_disc_lr].iter().any(|lr| !(*lr > 0.0)) {
            return bad("learning rates must be positive".into());
        }
        if self.hidden.contains(&0) || self.embed_dim == Some(0) {
            return bad("network widths must be positive".into());
        }
        if self.eval_every > 0 && self.eval_episodes == 0 {
            return bad("eval_episodes must be positive when evaluation is enabled".into());
        }
        Ok(())
    }
}

/// How the anchor buffer is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorKind {
    #[default]
    Shuffle,
    Random,
}

/// Component switches for ablation runs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ablations {
    /// Uniform instead of confusion-weighted imitator selection.
    pub no_das: bool,
    /// Rate fixed at the upper clip; also turns off confusion weighting.
    pub no_sar: bool,
    /// Overrides the tent peak `p`.
    pub sar_p: Option<f64>,
    pub anchor: AnchorKind,
}

impl Ablations {
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.sar_p {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Config(format!("sar_p must lie strictly inside (0, 1), got {p}")));
            }
        }
        Ok(())
    }

    pub fn uses_confusion_weights(&self) -> bool {
        !self.no_das && !self.no_sar
    }
}
