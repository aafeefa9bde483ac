//! Imitation learning from state-corrupted demonstrations.
//!
//! The crate bundles everything needed to study adversarial imitation when
//! the expert's states have passed through a fixed affine corruption
//! `s' = A s + B`:
//!
//! - [`nn`]: small dense networks with analytic gradients, Adam and gradient
//!   reversal.
//! - [`envs`]: a 2-D point-mass control task and exact tabular MDPs.
//! - [`noise`]: the linear time-invariant corruption family.
//! - [`datasets`]: domain-tagged demonstration buffers and anchor buffers.
//! - [`dida`]: the domain-adversarial imitation learner (encoder, noise and
//!   policy discriminators, adversarial sampling, self-adaptive rate).
//! - [`rl`]: PPO plus the behavior cloning and GAIL baselines.
//! - [`diagnostics`]: occupancy-measure checks and training probes.
//! - [`experiment`]: configuration and the end-to-end pipelines used by the CLI.

pub mod datasets;
pub mod diagnostics;
pub mod dida;
pub mod envs;
pub mod error;
pub mod experiment;
pub mod io_util;
pub mod nn;
pub mod noise;
pub mod rl;
pub mod rngs;

pub use dida::{DidaConfig, IterState};
pub use datasets::{DemoBuffer, Domain, Expertise, NoiseLevel, TransitionRecord};
pub use envs::{EnvSpec, PointMass2D, TabularMdp};
pub use error::{Error, Result};
pub use nn::{DenseNet, HeadKind};
pub use noise::{CombinedNoise, LtiNoise, NoiseKind};
pub use rl::{GaussianPolicy, PpoConfig};
