//! Domain-adversarial imitation from corrupted demonstrations.

pub mod branches;
pub mod config;
pub mod das;
pub mod formulas;
pub mod train;

pub use branches::{
    encoder_gradients, noise_branch_update, policy_branch_update, Blocks, DidaNets, EncoderGrads, NoiseBranch,
    PolicyBranch,
};
pub use config::{Ablations, AnchorKind, DidaConfig};
pub use das::{das_mix, weighted_sample_with_replacement, weighted_sample_without_replacement, DasMix, Slot};
pub use formulas::{adaptive_rate, adaptive_rate_raw, confusion_distribution, domain_weight};
pub use train::{dida_train, DidaOutcome, DidaTrainer, IterState};
