//! End-to-end pipelines behind the CLI subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method, NoiseSpec};
use crate::datasets::{anchor_random, anchor_shuffle, load_buffer, save_buffer, DemoBuffer, Expertise, NoiseLevel};
use crate::dida::{dida_train, AnchorKind, DidaTrainer};
use crate::envs::{make_env, rollout_episode, Environment};
use crate::io_util::{write_atomic, write_json_atomic};
use crate::nn::checkpoint::{load_net, save_net};
use crate::noise::{corrupt_buffer, save_noise, NoiseOperator};
use crate::rl::{bc_train, evaluate, gail_train, train_ppo, EvalReport, GaussianPolicy, PpoConfig, StochasticActor};
use crate::rngs::{stream_rng, Stream, StreamState};
use crate::{Error, Result};

/// Settings for expert training and demonstration collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpertConfig {
    pub env: String,
    pub ppo: PpoConfig,
    pub iterations: usize,
    pub episodes: usize,
    pub eval_episodes: usize,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            env: crate::envs::point_mass::NAME.to_owned(),
            ppo: PpoConfig { hidden: vec![64, 64], ..PpoConfig::default() },
            iterations: 200,
            episodes: 50,
            eval_episodes: 100,
        }
    }
}

impl ExpertConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Deterministic-evaluation return of the expert built by [`cmd_expert`]
/// with [`ExpertConfig::default`] and [`EXPERT_SEED`].
pub const EXPERT_PLATEAU_RETURN: f64 = -13.96;
pub const EXPERT_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertReport {
    pub seed: u64,
    pub records: usize,
    pub eval: EvalReport,
}

pub const POLICY_FILE: &str = "policy.json";
pub const VALUE_FILE: &str = "value.json";
pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const EVAL_JSON: &str = "eval.json";
pub const EVAL_CSV: &str = "eval.csv";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CONFIG_FILE: &str = "config.json";
pub const CKPT_DIR: &str = "ckpt";
pub const STATE_FILE: &str = "state.json";

/// Writes `returns` as `episode,return` rows.
pub fn eval_csv(report: &EvalReport) -> String {
    let mut out = String::from("episode,return\n");
    for (i, r) in report.returns.iter().enumerate() {
        writeln!(out, "{i},{r}").expect("writing to a string");
    }
    out
}

/// Trains the expert with PPO, saves its networks, collects
/// `episodes` stochastic demonstrations and evaluates the mean action.
pub fn cmd_expert(config: &ExpertConfig, seed: u64, out: &Path, mut on_iter: impl FnMut(usize, f64)) -> Result<ExpertReport> {
    let mut env = make_env(&config.env)?;
    let mut training = String::new();
    let agent = train_ppo(env.as_mut(), config.ppo.clone(), config.iterations, seed, |log, _| {
        training.push_str(&serde_json::to_string(log)?);
        training.push('\n');
        on_iter(log.iteration, log.mean_return);
        Ok(())
    })?;
    std::fs::create_dir_all(out)?;
    write_atomic(&out.join("training.jsonl"), training.as_bytes())?;
    save_net(agent.policy.net(), &out.join(POLICY_FILE))?;
    save_net(&agent.value, &out.join(VALUE_FILE))?;

    let buffer = collect_demonstrations(&agent.policy, env.as_mut(), config.episodes, seed)?;
    save_buffer(&buffer, &out.join(CORPUS_FILE))?;
    let eval = evaluate(&agent.policy, env.as_mut(), config.eval_episodes, seed)?;
    write_atomic(&out.join(EVAL_CSV), eval_csv(&eval).as_bytes())?;
    let report = ExpertReport { seed, records: buffer.len(), eval };
    write_json_atomic(&out.join(EVAL_JSON), &report)?;
    Ok(report)
}

/// Stochastic rollouts of `policy`, tagged expert and pure.
pub fn collect_demonstrations(policy: &GaussianPolicy, env: &mut dyn Environment, episodes: usize, seed: u64) -> Result<DemoBuffer> {
    if episodes == 0 {
        return Err(Error::Config("need at least one demonstration episode".into()));
    }
    let spec = env.spec().clone();
    let mut rng = stream_rng(seed, Stream::Anchor);
    let actor = StochasticActor(policy);
    let mut records = Vec::with_capacity(episodes * spec.horizon);
    for ep in 0..episodes {
        records.extend(rollout_episode(&actor, env, ep, &mut rng)?);
    }
    DemoBuffer::new(records, Expertise::Expert, NoiseLevel::Pure, spec.state_dim, spec.action_dim, spec.horizon)
}

/// Corrupts a clean corpus, writing the noisy corpus and the operator.
pub fn cmd_corrupt(corpus: &Path, noise: &NoiseSpec, out_corpus: &Path, out_noise: &Path) -> Result<(DemoBuffer, NoiseOperator)> {
    let clean = load_buffer(corpus)?;
    let (noisy, op) = corrupt_with_spec(&clean, noise)?;
    save_buffer(&noisy, out_corpus)?;
    save_noise(&op, out_noise)?;
    Ok((noisy, op))
}

pub fn corrupt_with_spec(clean: &DemoBuffer, noise: &NoiseSpec) -> Result<(DemoBuffer, NoiseOperator)> {
    if clean.noise_level != NoiseLevel::Pure {
        return Err(Error::Input("corpus is already noisy".into()));
    }
    let op = noise.build(clean.state_dim, clean.num_episodes())?;
    let mut noisy = corrupt_buffer(clean, &op)?;
    noisy.noise_spec = Some(match op.seed() {
        Some(seed) => format!("{}:{seed}", op.label()),
        None => op.label(),
    });
    Ok((noisy, op))
}

/// Final result of one seed of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub method: Method,
    pub seed: u64,
    pub eval_mean: f64,
    pub eval_std: f64,
    pub run_dir: PathBuf,
}

/// Bookkeeping written next to the network files of a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointState {
    pub format: String,
    pub version: u32,
    pub method: Method,
    pub seed: u64,
    pub iteration: usize,
    pub streams: Vec<StreamState>,
}

pub const CHECKPOINT_FORMAT: &str = "dida-run-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Appends JSON lines and rewrites the file atomically after each one.
struct MetricsLog {
    path: PathBuf,
    text: String,
}

impl MetricsLog {
    fn new(path: PathBuf) -> Result<Self> {
        write_atomic(&path, b"")?;
        Ok(Self { path, text: String::new() })
    }

    fn push<T: Serialize>(&mut self, value: &T) -> Result<()> {
        self.text.push_str(&serde_json::to_string(value)?);
        self.text.push('\n');
        write_atomic(&self.path, self.text.as_bytes())
    }
}

/// Loads the corpus named by `config` and applies its noise, if any.
pub fn prepare_corpus(config: &ExperimentConfig) -> Result<(DemoBuffer, Option<NoiseOperator>)> {
    let buffer = load_buffer(&config.corpus)?;
    match &config.noise {
        Some(spec) => {
            let (noisy, op) = corrupt_with_spec(&buffer, spec)?;
            Ok((noisy, Some(op)))
        }
        None if buffer.noise_level == NoiseLevel::Noisy => Ok((buffer, None)),
        None => Err(Error::Config("corpus is clean; give a noise spec (identity for none)".into())),
    }
}

/// Runs every seed of `config`, one run directory per seed.
pub fn cmd_train(config: &ExperimentConfig, mut on_line: impl FnMut(u64, &str)) -> Result<Vec<RunSummary>> {
    config.validate()?;
    let (noisy, op) = prepare_corpus(config)?;
    config
        .seeds
        .iter()
        .map(|&seed| train_seed(config, seed, &noisy, op.as_ref(), |line| on_line(seed, line)))
        .collect()
}

/// One seed of one experiment on an already prepared noisy corpus.
pub fn train_seed(
    config: &ExperimentConfig,
    seed: u64,
    noisy: &DemoBuffer,
    op: Option<&NoiseOperator>,
    mut on_line: impl FnMut(&str),
) -> Result<RunSummary> {
    let dir = config.run_dir(seed);
    let ckpt = dir.join(CKPT_DIR);
    std::fs::create_dir_all(&ckpt)?;
    let snapshot = ExperimentConfig { seeds: vec![seed], ..config.clone() };
    write_atomic(&dir.join(CONFIG_FILE), snapshot.to_json()?.as_bytes())?;
    write_atomic(&ckpt.join(CONFIG_FILE), snapshot.to_json()?.as_bytes())?;
    let mut metrics = MetricsLog::new(dir.join(METRICS_FILE))?;
    let mut env = make_env(&config.env)?;

    let (policy, iteration, streams) = match config.method {
        Method::Dida => {
            let anchor = build_anchor(config, seed, noisy, op, env.as_mut())?;
            let outcome = dida_train(
                &config.dida,
                &config.ablations,
                &config.ppo,
                env.as_mut(),
                noisy,
                &anchor,
                seed,
                |state, _| {
                    metrics.push(state)?;
                    on_line(metrics.text.lines().last().unwrap_or(""));
                    Ok(())
                },
            )?;
            let t = &outcome.trainer;
            save_dida_nets(t, &ckpt)?;
            (t.agent.policy.clone(), t.iteration(), t.stream_states())
        }
        Method::Gail => {
            let outcome = gail_train(env.as_mut(), noisy, &config.gail, &config.ppo, seed, |it, _| {
                metrics.push(it)?;
                on_line(metrics.text.lines().last().unwrap_or(""));
                Ok(())
            })?;
            save_net(&outcome.agent.value, &ckpt.join(VALUE_FILE))?;
            save_net(&outcome.discriminator, &ckpt.join("discriminator.json"))?;
            (outcome.agent.policy, outcome.history.len(), Vec::new())
        }
        Method::Bc => {
            let mut rng = stream_rng(seed, Stream::Init);
            let mut err = None;
            let (policy, history) = bc_train(noisy, &config.bc, &mut rng, |epoch| {
                if err.is_none() {
                    match metrics.push(epoch) {
                        Ok(()) => on_line(metrics.text.lines().last().unwrap_or("")),
                        Err(e) => err = Some(e),
                    }
                }
            })?;
            if let Some(e) = err {
                return Err(e);
            }
            (policy, history.len(), vec![StreamState::capture(seed, Stream::Init, &rng)])
        }
    };
    save_net(policy.net(), &ckpt.join(POLICY_FILE))?;
    let state = CheckpointState {
        format: CHECKPOINT_FORMAT.to_owned(),
        version: CHECKPOINT_VERSION,
        method: config.method,
        seed,
        iteration,
        streams,
    };
    write_json_atomic(&ckpt.join(STATE_FILE), &state)?;

    let report = evaluate(&policy, env.as_mut(), config.eval_episodes, seed)?;
    write_atomic(&dir.join(EVAL_CSV), eval_csv(&report).as_bytes())?;
    Ok(RunSummary {
        name: config.name.clone(),
        method: config.method,
        seed,
        eval_mean: report.mean,
        eval_std: report.std,
        run_dir: dir,
    })
}

/// Anchor buffer per the ablation setting. Shuffled anchors permute the
/// noisy corpus; random anchors roll out a uniform policy through the
/// same operator.
pub fn build_anchor(
    config: &ExperimentConfig,
    seed: u64,
    noisy: &DemoBuffer,
    op: Option<&NoiseOperator>,
    env: &mut dyn Environment,
) -> Result<DemoBuffer> {
    let mut rng = stream_rng(seed, Stream::Anchor);
    match config.ablations.anchor {
        AnchorKind::Shuffle => anchor_shuffle(noisy, &mut rng),
        AnchorKind::Random => {
            let op = op.ok_or_else(|| Error::Config("a random anchor needs the noise spec".into()))?;
            anchor_random(env, op, noisy.num_episodes(), &mut rng)
        }
    }
}

pub fn save_dida_nets(trainer: &DidaTrainer, dir: &Path) -> Result<()> {
    save_net(&trainer.nets.encoder, &dir.join("encoder.json"))?;
    save_net(&trainer.nets.noise_disc, &dir.join("noise_disc.json"))?;
    save_net(&trainer.nets.policy_disc, &dir.join("policy_disc.json"))?;
    save_net(&trainer.agent.value, &dir.join(VALUE_FILE))
}

pub fn load_dida_nets(dir: &Path) -> Result<crate::dida::DidaNets> {
    Ok(crate::dida::DidaNets {
        encoder: load_net(&dir.join("encoder.json"))?,
        noise_disc: load_net(&dir.join("noise_disc.json"))?,
        policy_disc: load_net(&dir.join("policy_disc.json"))?,
    })
}

/// Resolves a policy file from a file path, a checkpoint directory or a run
/// directory.
pub fn resolve_policy(path: &Path) -> Result<PathBuf> {
    let candidates = if path.is_dir() {
        vec![path.join(POLICY_FILE), path.join(CKPT_DIR).join(POLICY_FILE)]
    } else {
        vec![path.to_path_buf()]
    };
    candidates
        .into_iter()
        .find(|p| p.is_file())
        .ok_or_else(|| Error::Input(format!("no policy checkpoint at {}", path.display())))
}

pub fn cmd_eval(path: &Path, env_name: &str, episodes: usize, seed: u64, csv_out: Option<&Path>) -> Result<EvalReport> {
    let policy = GaussianPolicy::from_net(load_net(&resolve_policy(path)?)?)?;
    let mut env = make_env(env_name)?;
    let report = evaluate(&policy, env.as_mut(), episodes, seed)?;
    if let Some(out) = csv_out {
        write_atomic(out, eval_csv(&report).as_bytes())?;
    }
    Ok(report)
}

/// Fixed-width table of runs followed by per-method mean and spread of the
/// seed means.
pub fn format_summary(runs: &[RunSummary]) -> String {
    let mut out = String::new();
    writeln!(out, "{:<12} {:<6} {:>6} {:>12} {:>10}", "experiment", "method", "seed", "eval_mean", "eval_std").unwrap();
    for r in runs {
        writeln!(out, "{:<12} {:<6} {:>6} {:>12.3} {:>10.3}", r.name, r.method, r.seed, r.eval_mean, r.eval_std).unwrap();
    }
    let mut groups: Vec<(&str, Method)> = Vec::new();
    for r in runs {
        if !groups.contains(&(r.name.as_str(), r.method)) {
            groups.push((r.name.as_str(), r.method));
        }
    }
    for (name, method) in groups {
        let means: Vec<f64> =
            runs.iter().filter(|r| r.name == name && r.method == method).map(|r| r.eval_mean).collect();
        let rep = EvalReport::from_returns(means);
        writeln!(out, "{:<12} {:<6} {:>6} {:>12.3} {:>10.3}", name, method, "all", rep.mean, rep.std).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::TransitionRecord;

    fn tiny_corpus(dir: &Path) -> PathBuf {
        let mut env = crate::envs::PointMass2D::with_horizon(10);
        let mut rng = stream_rng(0, Stream::Env);
        let actor = crate::envs::ZeroActor { action_dim: 2 };
        let mut records: Vec<TransitionRecord> = Vec::new();
        for ep in 0..8 {
            records.extend(rollout_episode(&actor, &mut env, ep, &mut rng).unwrap());
        }
        let buffer = DemoBuffer::new(records, Expertise::Expert, NoiseLevel::Pure, 4, 2, 10).unwrap();
        let path = dir.join("clean.jsonl");
        save_buffer(&buffer, &path).unwrap();
        path
    }

    fn small_config(dir: &Path, method: Method) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            name: format!("t-{method}"),
            method,
            seeds: vec![1, 2],
            corpus: tiny_corpus(dir),
            noise: Some(NoiseSpec::of_kind("shuffle", 5)),
            out: dir.join("runs"),
            eval_episodes: 2,
            ..ExperimentConfig::default()
        };
        cfg.dida.iterations = 2;
        cfg.dida.batch_size = 40;
        cfg.dida.hidden = vec![6];
        cfg.gail.iterations = 2;
        cfg.gail.batch_size = 40;
        cfg.gail.disc_hidden = vec![6];
        cfg.bc.epochs = 3;
        cfg.bc.hidden = vec![6];
        cfg.ppo.hidden = vec![6];
        cfg.ppo.minibatch = 20;
        cfg.ppo.epochs = 1;
        cfg
    }

    #[test]
    fn every_method_writes_the_run_layout() {
        let dir = tempfile::tempdir().unwrap();
        for method in [Method::Dida, Method::Gail, Method::Bc] {
            let cfg = small_config(dir.path(), method);
            let runs = cmd_train(&cfg, |_, _| ()).unwrap();
            assert_eq!(runs.len(), 2);
            for run in &runs {
                for f in [CONFIG_FILE, METRICS_FILE, EVAL_CSV] {
                    assert!(run.run_dir.join(f).is_file(), "{method} {f}");
                }
                assert!(run.run_dir.join(CKPT_DIR).join(POLICY_FILE).is_file());
                let snapshot = ExperimentConfig::load(&run.run_dir.join(CONFIG_FILE)).unwrap();
                assert_eq!(snapshot.seeds, vec![run.seed]);
                let lines = std::fs::read_to_string(run.run_dir.join(METRICS_FILE)).unwrap();
                let expected = if method == Method::Bc { 3 } else { 2 };
                assert_eq!(lines.lines().count(), expected);
                let csv = std::fs::read_to_string(run.run_dir.join(EVAL_CSV)).unwrap();
                assert_eq!(csv.lines().count(), 3);
            }
        }
        let dida_ckpt = dir.path().join("runs/t-dida/1/ckpt");
        assert!(load_dida_nets(&dida_ckpt).is_ok());
        let state: CheckpointState =
            serde_json::from_str(&std::fs::read_to_string(dida_ckpt.join(STATE_FILE)).unwrap()).unwrap();
        assert_eq!(state.iteration, 2);
        assert_eq!(state.streams.len(), 2);
    }

    #[test]
    fn same_config_and_seed_give_identical_metrics() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(dir.path(), Method::Dida);
        cfg.seeds = vec![3];
        let a = cmd_train(&cfg, |_, _| ()).unwrap();
        let first = std::fs::read(a[0].run_dir.join(METRICS_FILE)).unwrap();
        cfg.name = "again".into();
        let b = cmd_train(&cfg, |_, _| ()).unwrap();
        assert_eq!(first, std::fs::read(b[0].run_dir.join(METRICS_FILE)).unwrap());
        assert_eq!(a[0].eval_mean, b[0].eval_mean);
    }

    #[test]
    fn random_anchor_needs_an_operator() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(dir.path(), Method::Dida);
        cfg.ablations.anchor = AnchorKind::Random;
        let clean = load_buffer(&cfg.corpus).unwrap();
        let (noisy, op) = corrupt_with_spec(&clean, cfg.noise.as_ref().unwrap()).unwrap();
        let mut env = make_env(&cfg.env).unwrap();
        let anchor = build_anchor(&cfg, 0, &noisy, Some(&op), env.as_mut()).unwrap();
        assert_eq!(anchor.num_episodes(), noisy.num_episodes());
        assert!(matches!(build_anchor(&cfg, 0, &noisy, None, env.as_mut()), Err(Error::Config(_))));
    }

    #[test]
    fn clean_corpus_without_noise_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(dir.path(), Method::Gail);
        cfg.noise = None;
        assert!(matches!(cmd_train(&cfg, |_, _| ()), Err(Error::Config(_))));
    }

    #[test]
    fn corrupt_writes_corpus_and_operator() {
        let dir = tempfile::tempdir().unwrap();
        let clean = tiny_corpus(dir.path());
        let (noisy, op) = cmd_corrupt(
            &clean,
            &NoiseSpec::of_kind("identity", 0),
            &dir.path().join("noisy.jsonl"),
            &dir.path().join("noise.json"),
        )
        .unwrap();
        let original = load_buffer(&clean).unwrap();
        assert_eq!(noisy.records, original.records);
        assert_eq!(noisy.noise_level, NoiseLevel::Noisy);
        assert_eq!(crate::noise::load_noise(&dir.path().join("noise.json")).unwrap(), op);
        assert_eq!(load_buffer(&dir.path().join("noisy.jsonl")).unwrap(), noisy);
    }

    #[test]
    fn eval_requires_a_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let err = cmd_eval(dir.path(), "point-mass-2d", 1, 0, None).unwrap_err();
        assert!(err.to_string().contains("no policy checkpoint"));
    }

    #[test]
    fn summary_table_layout() {
        let run = |seed, m| RunSummary {
            name: "demo".into(),
            method: Method::Gail,
            seed,
            eval_mean: m,
            eval_std: 0.5,
            run_dir: PathBuf::new(),
        };
        let table = format_summary(&[run(0, -10.0), run(1, -20.0)]);
        let expected = "\
experiment   method   seed    eval_mean   eval_std
demo         gail        0      -10.000      0.500
demo         gail        1      -20.000      0.500
demo         gail      all      -15.000      5.000
";
        assert_eq!(table, expected);
    }
}
