//! Policy optimization and the imitation baselines.

pub mod bc;
pub mod eval;
pub mod gail;
pub mod policy;
pub mod ppo;
pub mod returns;

pub use bc::{bc_train, BcConfig, BcEpoch};
pub use eval::{evaluate, EvalReport};
pub use gail::{discriminator_step, gail_train, pair_matrix, GailConfig, GailIter, GailOutcome};
pub use policy::{DeterministicActor, GaussianPolicy, StochasticActor};
pub use ppo::{completed_episode_returns, ppo_update, train_ppo, PpoAgent, PpoConfig, PpoIterLog, PpoStats};
pub use returns::{compute_advantages, compute_cumulative_returns, compute_returns, ReturnMode};
