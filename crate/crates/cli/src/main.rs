use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dida_core::dida::AnchorKind;
use dida_core::experiment::diagnose::{
    diagnose_export, diagnose_gail_sweep, diagnose_occupancy, diagnose_pacc, histogram_csv, sweep_csv,
};
use dida_core::experiment::{
    cmd_corrupt, cmd_eval, cmd_expert, cmd_train, format_summary, ExpertConfig, ExperimentConfig, Method, NoiseSpec,
};
use dida_core::io_util::write_atomic;

/// Imitation learning from state-corrupted demonstrations.
#[derive(Debug, Parser)]
#[command(name = "dida", version)]
struct Cli {
    /// Seed; for `train` it replaces the config's seed list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON config: an expert config for `expert`, an experiment config otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a PPO expert, then write its checkpoint, demonstration corpus and eval report.
    Expert(ExpertArgs),
    /// Corrupt a clean corpus with a noise operator.
    Corrupt(CorruptArgs),
    /// Train DIDA, GAIL or BC for every seed of an experiment.
    Train(TrainArgs),
    /// Evaluate a policy checkpoint.
    Eval(EvalArgs),
    /// Run a diagnostic.
    #[command(subcommand)]
    Diagnose(Diagnose),
}

#[derive(Debug, Args)]
struct ExpertArgs {
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Debug, Args)]
struct NoiseArgs {
    /// gaussian, normal, doubly-stochastic, shuffle, identity or combined.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Seed of the operator draw.
    #[arg(long)]
    noise_seed: Option<u64>,
    /// Previously saved operator.
    #[arg(long, conflicts_with = "kind")]
    noise_file: Option<PathBuf>,
}

impl NoiseArgs {
    fn given(&self) -> bool {
        self.kind.is_some() || self.noise_file.is_some()
    }

    fn spec(&self, default_seed: u64) -> NoiseSpec {
        NoiseSpec {
            kind: self.kind.clone(),
            mu: self.mu,
            sigma: self.sigma,
            seed: self.noise_seed.unwrap_or(default_seed),
            file: self.noise_file.clone(),
        }
    }
}

#[derive(Debug, Args)]
struct CorruptArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    noise: NoiseArgs,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Uniform instead of confusion-weighted imitator selection.
    #[arg(long)]
    no_das: bool,
    /// Fix the imitator rate at its upper clip.
    #[arg(long)]
    no_sar: bool,
    #[arg(long)]
    sar_p: Option<f64>,
    /// shuffle or random.
    #[arg(long)]
    anchor: Option<String>,
    /// Outer iterations (DIDA and GAIL) or epochs (BC).
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Policy file, checkpoint directory or run directory.
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value = "point-mass-2d")]
    env: String,
}

#[derive(Debug, Subcommand)]
enum Diagnose {
    /// Occupancy-measure invariance under state relabeling on random tabular MDPs.
    Occupancy {
        #[arg(long, default_value_t = 100)]
        draws: usize,
        #[arg(long, default_value_t = 8)]
        max_states: usize,
    },
    /// Histogram of the noise discriminator's initial accuracy.
    PaccInit {
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// GAIL returns across Gaussian noise scales.
    GailSweep {
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1.0")]
        sigmas: Vec<f64>,
    },
    /// Embeddings of expert, anchor and imitator states for a DIDA checkpoint.
    ExportEmbeddings {
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

fn load_experiment(cli: &Cli) -> Result<ExperimentConfig> {
    match &cli.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

fn apply_globals(cli: &Cli, cfg: &mut ExperimentConfig) {
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
}

fn out_dir(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn run_expert(cli: &Cli, args: &ExpertArgs) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => ExpertConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => ExpertConfig::default(),
    };
    if let Some(e) = args.episodes {
        cfg.episodes = e;
    }
    if let Some(i) = args.iterations {
        cfg.iterations = i;
    }
    let seed = cli.seed.unwrap_or(dida_core::experiment::EXPERT_SEED);
    let out = out_dir(cli, "runs/expert");
    let report = cmd_expert(&cfg, seed, &out, |i, ret| {
        if (i + 1) % 10 == 0 {
            eprintln!("iteration {:>4}  mean return {ret:.3}", i + 1);
        }
    })?;
    println!("corpus: {} records in {}", report.records, out.join("corpus.jsonl").display());
    println!("expert eval over {} episodes: {:.3} ± {:.3}", report.eval.returns.len(), report.eval.mean, report.eval.std);
    Ok(())
}

fn run_corrupt(cli: &Cli, args: &CorruptArgs) -> Result<()> {
    if !args.noise.given() {
        bail!("corrupt needs --kind or --noise-file");
    }
    let spec = args.noise.spec(cli.seed.unwrap_or(0));
    let out = out_dir(cli, "runs/noisy");
    let (noisy, op) = cmd_corrupt(&args.corpus, &spec, &out.join("corpus.jsonl"), &out.join("noise.json"))?;
    println!("{} noise: {} records written to {}", op.label(), noisy.len(), out.display());
    Ok(())
}

fn run_train(cli: &Cli, args: &TrainArgs) -> Result<()> {
    let mut cfg = load_experiment(cli)?;
    apply_globals(cli, &mut cfg);
    if let Some(m) = args.method {
        cfg.method = m;
    }
    if let Some(c) = &args.corpus {
        cfg.corpus = c.clone();
    }
    if let Some(n) = &args.name {
        cfg.name = n.clone();
    }
    if args.noise.given() {
        cfg.noise = Some(args.noise.spec(cli.seed.unwrap_or(0)));
    }
    cfg.ablations.no_das |= args.no_das;
    cfg.ablations.no_sar |= args.no_sar;
    if let Some(p) = args.sar_p {
        cfg.ablations.sar_p = Some(p);
    }
    if let Some(a) = &args.anchor {
        cfg.ablations.anchor = match a.as_str() {
            "shuffle" => AnchorKind::Shuffle,
            "random" => AnchorKind::Random,
            other => bail!("unknown anchor {other:?} (expected shuffle or random)"),
        };
    }
    if let Some(i) = args.iterations {
        cfg.dida.iterations = i;
        cfg.gail.iterations = i;
        cfg.bc.epochs = i;
    }
    cfg.validate()?;
    let runs = cmd_train(&cfg, |seed, line| eprintln!("[seed {seed}] {line}"))?;
    print!("{}", format_summary(&runs));
    Ok(())
}

fn run_eval(cli: &Cli, args: &EvalArgs) -> Result<()> {
    let csv = cli.out.as_ref().map(|o| o.join("eval.csv"));
    let report = cmd_eval(&args.checkpoint, &args.env, args.episodes, cli.seed.unwrap_or(0), csv.as_deref())?;
    println!("eval over {} episodes: {:.3} ± {:.3}", args.episodes, report.mean, report.std);
    Ok(())
}

fn write_output(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn run_diagnose(cli: &Cli, which: &Diagnose) -> Result<()> {
    let out = out_dir(cli, "runs/diagnostics");
    let seed = cli.seed.unwrap_or(0);
    match which {
        Diagnose::Occupancy { draws, max_states } => {
            let r = diagnose_occupancy(*draws, *max_states, seed)?;
            println!(
                "occupancy: {} draws, max relabel diff {:.3e}, max normalization error {:.3e}, truncation excess {:.3e}",
                r.draws, r.max_relabel_diff, r.max_normalization_error, r.max_truncation_excess
            );
            if !r.passed {
                bail!("occupancy invariance check failed");
            }
        }
        Diagnose::PaccInit { trials } => {
            let cfg = load_experiment(cli)?;
            let hist = diagnose_pacc(&cfg, *trials, seed)?;
            write_output(&out.join("pacc_init.csv"), &histogram_csv(&hist))?;
            let (lo, hi) = hist.top_two_centers();
            println!(
                "p_acc modes at {lo:.3} and {hi:.3}; {:.0}% within 0.05 of 1/3 or 2/3",
                100.0 * hist.concentration(&[1.0 / 3.0, 2.0 / 3.0], 0.05)
            );
        }
        Diagnose::GailSweep { sigmas } => {
            let mut cfg = load_experiment(cli)?;
            apply_globals(cli, &mut cfg);
            let table = diagnose_gail_sweep(&cfg, sigmas, |c| {
                eprintln!("sigma {} seed {}: {:.3}", c.sigma, c.seed, c.eval_return)
            })?;
            write_output(&out.join("gail_sweep.csv"), &sweep_csv(&table))?;
            for s in table.sigmas() {
                println!("sigma {s}: mean return {:.3}", table.mean_for(s));
            }
        }
        Diagnose::ExportEmbeddings { checkpoint } => {
            let cfg = load_experiment(cli)?;
            let path = out.join("embeddings.csv");
            let summaries = diagnose_export(&cfg, checkpoint, seed, &path)?;
            for s in summaries {
                println!("{}: {} rows, mean D_n {:.4}", s.tag, s.rows, s.mean_d_n);
            }
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Expert(a) => run_expert(cli, a),
        Command::Corrupt(a) => run_corrupt(cli, a),
        Command::Train(a) => run_train(cli, a),
        Command::Eval(a) => run_eval(cli, a),
        Command::Diagnose(d) => run_diagnose(cli, d),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
