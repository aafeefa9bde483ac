//! Configuration files and the pipelines run by the command-line tool.

pub mod config;
pub mod diagnose;
pub mod pipelines;

pub use config::{ExperimentConfig, Method, NoiseSpec};
pub use pipelines::{
    cmd_corrupt, cmd_eval, cmd_expert, cmd_train, format_summary, ExpertConfig, ExpertReport, RunSummary,
    EXPERT_PLATEAU_RETURN, EXPERT_SEED,
};
