//! Diagnostics pipelines with CSV outputs.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::pipelines::{build_anchor, load_dida_nets, prepare_corpus, resolve_policy};
use crate::datasets::{load_buffer, DemoBuffer, Expertise, NoiseLevel};
use crate::diagnostics::{
    export_embeddings, gaussian_scale_sweep, occupancy_measure, pacc_init_stat, random_policy, truncated_occupancy,
    verify_relabeling_invariance, BufferSummary, PaccHistogram, SweepTable,
};
use crate::envs::{make_env, TabularMdp};
use crate::nn::checkpoint::load_net;
use crate::rl::{GaussianPolicy, PpoAgent};
use crate::rngs::{stream_rng, Stream};
use crate::Result;

pub const RELABEL_TOL: f64 = 1e-10;
pub const SOLVE_TOL: f64 = 1e-12;
pub const TRUNCATION_HORIZON: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyReport {
    pub draws: usize,
    pub max_relabel_diff: f64,
    pub max_normalization_error: f64,
    /// Largest amount by which the truncated series misses the exact solution
    /// beyond its tail bound.
    pub max_truncation_excess: f64,
    pub passed: bool,
}

/// Random `(MDP, policy, permutation)` draws with 2..=`max_states` states.
pub fn diagnose_occupancy(draws: usize, max_states: usize, seed: u64) -> Result<OccupancyReport> {
    let mut rng = stream_rng(seed, Stream::Sampler);
    let mut report = OccupancyReport {
        draws,
        max_relabel_diff: 0.0,
        max_normalization_error: 0.0,
        max_truncation_excess: 0.0,
        passed: true,
    };
    for _ in 0..draws {
        let states = rng.random_range(2..=max_states.max(2));
        let actions = rng.random_range(1..=3);
        let gamma = rng.random_range(0.0..0.95);
        let mdp = TabularMdp::random(states, actions, gamma, &mut rng)?;
        let policy = random_policy(states, actions, &mut rng);
        let mut perm: Vec<usize> = (0..states).collect();
        perm.shuffle(&mut rng);
        let occ = occupancy_measure(&mdp, &policy, SOLVE_TOL)?;
        let (brute, bound) = truncated_occupancy(&mdp, &policy, TRUNCATION_HORIZON)?;
        let excess = occ.rho.iter().zip(brute.iter()).map(|(x, y)| ((x - y).abs() - bound).max(0.0)).fold(0.0, f64::max);
        report.max_truncation_excess = report.max_truncation_excess.max(excess);
        report.max_normalization_error = report.max_normalization_error.max((occ.total() - 1.0).abs());
        let diff = verify_relabeling_invariance(&mdp, &policy, &perm, SOLVE_TOL)?;
        report.max_relabel_diff = report.max_relabel_diff.max(diff);
    }
    report.passed = report.max_relabel_diff < RELABEL_TOL
        && report.max_normalization_error < RELABEL_TOL
        && report.max_truncation_excess < 1e-12;
    Ok(report)
}

/// Initial `p_acc` over `trials` fresh initializations for the corpus,
/// noise and network settings of `config`.
pub fn diagnose_pacc(config: &ExperimentConfig, trials: usize, seed: u64) -> Result<PaccHistogram> {
    config.validate()?;
    let (noisy, op) = prepare_corpus(config)?;
    let mut env = make_env(&config.env)?;
    let anchor = build_anchor(config, seed, &noisy, op.as_ref(), env.as_mut())?;
    pacc_init_stat(env.as_mut(), &noisy, &anchor, &config.dida, &config.ppo, trials, seed)
}

pub fn histogram_csv(hist: &PaccHistogram) -> String {
    let bins = hist.counts.len() as f64;
    let mut out = String::from("bin_low,bin_high,count\n");
    for (k, c) in hist.counts.iter().enumerate() {
        writeln!(out, "{},{},{c}", k as f64 / bins, (k + 1) as f64 / bins).unwrap();
    }
    out
}

/// GAIL sweep over Gaussian scales on the clean corpus of `config`; the
/// noise seed comes from `config.noise` when present.
pub fn diagnose_gail_sweep(config: &ExperimentConfig, sigmas: &[f64], on_cell: impl FnMut(&crate::diagnostics::SweepCell)) -> Result<SweepTable> {
    config.validate()?;
    let clean = load_buffer(&config.corpus)?;
    let noise_seed = config.noise.as_ref().map_or(0, |n| n.seed);
    let mut env = make_env(&config.env)?;
    gaussian_scale_sweep(
        env.as_mut(),
        &clean,
        sigmas,
        &config.seeds,
        &config.gail,
        &config.ppo,
        noise_seed,
        config.eval_episodes,
        on_cell,
    )
}

pub fn sweep_csv(table: &SweepTable) -> String {
    let mut out = String::from("sigma,seed,eval_return\n");
    for c in &table.cells {
        writeln!(out, "{},{},{}", c.sigma, c.seed, c.eval_return).unwrap();
    }
    out
}

/// Exports embeddings of the noisy expert, anchor and one imitator rollout
/// for the DIDA checkpoint in `ckpt`.
pub fn diagnose_export(config: &ExperimentConfig, ckpt: &Path, seed: u64, out: &Path) -> Result<Vec<BufferSummary>> {
    config.validate()?;
    let nets = load_dida_nets(ckpt)?;
    let policy = GaussianPolicy::from_net(load_net(&resolve_policy(ckpt)?)?)?;
    let (noisy, op) = prepare_corpus(config)?;
    let mut env = make_env(&config.env)?;
    let anchor = build_anchor(config, seed, &noisy, op.as_ref(), env.as_mut())?;
    let spec = env.spec().clone();
    let value = crate::nn::DenseNet::new(spec.state_dim, &[1], 1, crate::nn::HeadKind::Linear, 0.0, &mut stream_rng(seed, Stream::Init))?;
    let agent = PpoAgent::from_parts(policy, value, config.ppo.clone());
    let records = agent.collect(env.as_mut(), noisy.len(), &mut stream_rng(seed, Stream::Policy))?;
    let imitator = DemoBuffer::new(records, Expertise::Random, NoiseLevel::Pure, spec.state_dim, spec.action_dim, spec.horizon)?;
    export_embeddings(&nets, &[("expert", &noisy), ("anchor", &anchor), ("imitator", &imitator)], config.dida.confusion_clip, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::SweepCell;

    #[test]
    fn occupancy_suite_passes() {
        let r = diagnose_occupancy(25, 8, 0).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.draws, 25);
    }

    #[test]
    fn csv_layouts() {
        let hist = PaccHistogram::from_values(vec![0.3, 0.7], 4);
        assert_eq!(histogram_csv(&hist), "bin_low,bin_high,count\n0,0.25,0\n0.25,0.5,1\n0.5,0.75,1\n0.75,1,0\n");
        let table = SweepTable { cells: vec![SweepCell { sigma: 0.5, seed: 2, eval_return: -3.25 }] };
        assert_eq!(sweep_csv(&table), "sigma,seed,eval_return\n0.5,2,-3.25\n");
    }
}
