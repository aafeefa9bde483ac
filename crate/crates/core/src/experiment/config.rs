//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dida::{Ablations, DidaConfig};
use crate::envs::make_env;
use crate::noise::{load_noise, CombinedNoise, LtiNoise, NoiseKind, NoiseOperator};
use crate::rl::{BcConfig, GailConfig, PpoConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Dida,
    Gail,
    Bc,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            Method::Dida => "dida",
            Method::Gail => "gail",
            Method::Bc => "bc",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dida" => Ok(Method::Dida),
            "gail" => Ok(Method::Gail),
            "bc" => Ok(Method::Bc),
            other => Err(Error::Config(format!("unknown method {other:?} (expected dida, gail or bc)"))),
        }
    }
}

/// Corruption applied to a clean corpus before training. Either `kind`
/// (with `seed` and, for Gaussian noise, `mu`/`sigma`) or `file` is set.
/// `kind` accepts every single-operator family plus `combined`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    pub kind: Option<String>,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub seed: u64,
    pub file: Option<PathBuf>,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { kind: None, mu: None, sigma: None, seed: 0, file: None }
    }
}

impl NoiseSpec {
    pub fn of_kind(kind: &str, seed: u64) -> Self {
        Self { kind: Some(kind.to_owned()), seed, ..Self::default() }
    }

    fn gaussian(&self) -> NoiseKind {
        let d = NoiseKind::gaussian_default();
        match d {
            NoiseKind::Gaussian { mu, sigma } => {
                NoiseKind::Gaussian { mu: self.mu.unwrap_or(mu), sigma: self.sigma.unwrap_or(sigma) }
            }
            other => other,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.kind, &self.file) {
            (Some(_), Some(_)) => Err(Error::Config("noise: give either kind or file, not both".into())),
            (None, None) => Err(Error::Config("noise: one of kind or file is required".into())),
            (None, Some(_)) => {
                if self.mu.is_some() || self.sigma.is_some() {
                    return Err(Error::Config("noise: mu/sigma only apply with kind".into()));
                }
                Ok(())
            }
            (Some(kind), None) => {
                if kind != "combined" {
                    let parsed: NoiseKind = kind.parse()?;
                    if !matches!(parsed, NoiseKind::Gaussian { .. }) && (self.mu.is_some() || self.sigma.is_some()) {
                        return Err(Error::Config(format!("noise: mu/sigma do not apply to {kind}")));
                    }
                }
                if let NoiseKind::Gaussian { mu, sigma } = self.gaussian() {
                    if !mu.is_finite() || !(sigma >= 0.0 && sigma.is_finite()) {
                        return Err(Error::Config(format!("noise: invalid gaussian parameters mu={mu}, sigma={sigma}")));
                    }
                }
                Ok(())
            }
        }
    }

    /// Loads or samples the operator. `episodes` sizes a combined partition.
    pub fn build(&self, dim: usize, episodes: usize) -> Result<NoiseOperator> {
        self.validate()?;
        if let Some(path) = &self.file {
            return load_noise(path);
        }
        let kind = self.kind.as_deref().expect("validated");
        if kind == "combined" {
            return Ok(CombinedNoise::sample_seeded(self.gaussian(), dim, episodes, self.seed)?.into());
        }
        let parsed = match kind.parse::<NoiseKind>()? {
            NoiseKind::Gaussian { .. } => self.gaussian(),
            other => other,
        };
        Ok(LtiNoise::sample_seeded(parsed, dim, self.seed)?.into())
    }
}

/// One experiment: a method, its settings and the seeds to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Run directories go to `out/name/seed`.
    pub name: String,
    pub env: String,
    pub method: Method,
    pub seeds: Vec<u64>,
    /// Expert corpus. Clean when `noise` is set, otherwise already noisy.
    pub corpus: PathBuf,
    pub noise: Option<NoiseSpec>,
    pub out: PathBuf,
    pub dida: DidaConfig,
    pub ablations: Ablations,
    pub ppo: PpoConfig,
    pub gail: GailConfig,
    pub bc: BcConfig,
    /// Episodes of the final deterministic evaluation.
    pub eval_episodes: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "exp".to_owned(),
            env: crate::envs::point_mass::NAME.to_owned(),
            method: Method::Dida,
            seeds: vec![0],
            corpus: PathBuf::new(),
            noise: None,
            out: PathBuf::from("runs"),
            dida: DidaConfig::default(),
            ablations: Ablations::default(),
            ppo: PpoConfig::default(),
            gail: GailConfig::default(),
            bc: BcConfig::default(),
            eval_episodes: 100,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name == "." || self.name == ".." {
            return bad("name must be a plain, nonempty directory name");
        }
        make_env(&self.env)?;
        if self.seeds.is_empty() {
            return bad("seeds must list at least one seed");
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return bad("seeds must be distinct");
        }
        if self.corpus.as_os_str().is_empty() {
            return bad("corpus path is required");
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes must be positive");
        }
        if let Some(noise) = &self.noise {
            noise.validate()?;
        }
        self.dida.validate()?;
        self.ablations.validate()?;
        self.ppo.validate()?;
        self.gail.validate()?;
        self.bc.validate()?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn run_dir(&self, seed: u64) -> PathBuf {
        self.out.join(&self.name).join(seed.to_string())
    }
}
