//! Linear time-invariant state noise `s̃ = A s + B`.

pub mod combined;
pub mod sinkhorn;
pub mod spec_file;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::datasets::{DemoBuffer, NoiseLevel};
use crate::rngs::{stream_rng, Stream};
use crate::{Error, Result};

pub use combined::CombinedNoise;
pub use sinkhorn::{max_sum_deviation, sinkhorn};
pub use spec_file::{load_noise, save_noise, NoiseOperator};

pub const DS_OFFSET: f64 = 0.1;
pub const DS_TOL: f64 = 1e-10;
pub const DS_MAX_ITER: usize = 100_000;
/// Row/column-sum tolerance accepted when validating a stored DS operator.
pub const DS_CHECK_TOL: f64 = 1e-8;

pub const DEFAULT_GAUSSIAN_MU: f64 = 0.0;
pub const DEFAULT_GAUSSIAN_SIGMA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseKind {
    Gaussian { mu: f64, sigma: f64 },
    Normal,
    DoublyStochastic,
    Shuffle,
    Identity,
}

impl NoiseKind {
    pub fn gaussian_default() -> Self {
        NoiseKind::Gaussian { mu: DEFAULT_GAUSSIAN_MU, sigma: DEFAULT_GAUSSIAN_SIGMA }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NoiseKind::Gaussian { .. } => "gaussian",
            NoiseKind::Normal => "normal",
            NoiseKind::DoublyStochastic => "doubly-stochastic",
            NoiseKind::Shuffle => "shuffle",
            NoiseKind::Identity => "identity",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseKind::Gaussian { mu, sigma } => write!(f, "gaussian(mu={mu}, sigma={sigma})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Parses a bare family name; Gaussian gets the default `(0, 0.1)`.
impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(NoiseKind::gaussian_default()),
            "normal" => Ok(NoiseKind::Normal),
            "doubly-stochastic" | "doubly_stochastic" | "ds" => Ok(NoiseKind::DoublyStochastic),
            "shuffle" | "permutation" => Ok(NoiseKind::Shuffle),
            "identity" | "none" => Ok(NoiseKind::Identity),
            other => Err(Error::Config(format!("unknown noise kind '{other}'"))),
        }
    }
}

/// An affine state corruption with fixed `(A, B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiNoise {
    kind: NoiseKind,
    a: Array2<f64>,
    b: Array1<f64>,
    seed: Option<u64>,
}

impl LtiNoise {
    pub fn identity(dim: usize) -> Self {
        Self { kind: NoiseKind::Identity, a: Array2::eye(dim), b: Array1::zeros(dim), seed: None }
    }

    /// Draw an operator of the given family.
    pub fn sample(kind: NoiseKind, dim: usize, rng: &mut dyn RngCore) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("noise dim must be at least 1".into()));
        }
        let mut a = Array2::<f64>::eye(dim);
        let mut b = Array1::<f64>::zeros(dim);
        match kind {
            NoiseKind::Gaussian { mu, sigma } => {
                if !(sigma >= 0.0) || !sigma.is_finite() || !mu.is_finite() {
                    return Err(Error::Config(format!("invalid gaussian noise parameters mu={mu} sigma={sigma}")));
                }
                for x in b.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *x = mu + sigma * z;
                }
            }
            NoiseKind::Normal => {
                for x in a.iter_mut() {
                    *x = rng.sample(StandardNormal);
                }
            }
            NoiseKind::DoublyStochastic => {
                let m = Array2::from_shape_simple_fn((dim, dim), || rng.random::<f64>() + DS_OFFSET);
                a = sinkhorn(m.view(), DS_TOL, DS_MAX_ITER)?;
            }
            NoiseKind::Shuffle => {
                let mut perm: Vec<usize> = (0..dim).collect();
                perm.shuffle(rng);
                a.fill(0.0);
                for (i, &j) in perm.iter().enumerate() {
                    a[[i, j]] = 1.0;
                }
            }
            NoiseKind::Identity => {}
        }
        Ok(Self { kind, a, b, seed: None })
    }

    /// Draw from the dedicated noise stream of `seed`.
    pub fn sample_seeded(kind: NoiseKind, dim: usize, seed: u64) -> Result<Self> {
        let mut rng = stream_rng(seed, Stream::Noise);
        let mut op = Self::sample(kind, dim, &mut rng)?;
        op.seed = Some(seed);
        Ok(op)
    }

    /// Build from explicit matrices, checking the family's invariants.
    pub fn from_parts(kind: NoiseKind, a: Array2<f64>, b: Array1<f64>, seed: Option<u64>) -> Result<Self> {
        let op = Self { kind, a, b, seed };
        op.validate()?;
        Ok(op)
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn b(&self) -> &Array1<f64> {
        &self.b
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.b.len();
        if self.a.dim() != (n, n) || n == 0 {
            return Err(Error::Shape(format!("A is {:?} but B has {} entries", self.a.dim(), n)));
        }
        if self.a.iter().chain(self.b.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Input("noise operator has non-finite entries".into()));
        }
        let is_eye = self.a == Array2::<f64>::eye(n);
        let b_zero = self.b.iter().all(|&x| x == 0.0);
        let fail = |what: &str| Err(Error::Input(format!("{} operator: {what}", self.kind.name())));
        match self.kind {
            NoiseKind::Gaussian { .. } if !is_eye => fail("A must be the identity"),
            NoiseKind::Identity if !is_eye || !b_zero => fail("A must be I and B zero"),
            NoiseKind::Normal | NoiseKind::DoublyStochastic | NoiseKind::Shuffle if !b_zero => fail("B must be zero"),
            NoiseKind::DoublyStochastic
                if self.a.iter().any(|&x| x < 0.0) || max_sum_deviation(self.a.view()) > DS_CHECK_TOL =>
            {
                fail("A must be nonnegative with unit row and column sums")
            }
            NoiseKind::Shuffle if !is_permutation_matrix(&self.a) => fail("A must be a permutation matrix"),
            _ => Ok(()),
        }
    }

    /// `A s + B`.
    pub fn apply(&self, s: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.dim() {
            return Err(Error::Shape(format!("state has {} entries, noise expects {}", s.len(), self.dim())));
        }
        Ok(self
            .a
            .rows()
            .into_iter()
            .zip(self.b.iter())
            .map(|(row, &bi)| row.iter().zip(s).map(|(aij, sj)| aij * sj).sum::<f64>() + bi)
            .collect())
    }
}

fn is_permutation_matrix(a: &Array2<f64>) -> bool {
    a.iter().all(|&x| x == 0.0 || x == 1.0)
        && a.rows().into_iter().all(|r| r.sum() == 1.0)
        && a.columns().into_iter().all(|c| c.sum() == 1.0)
}

/// Anything that can corrupt the states of a pure buffer.
pub trait StateNoise {
    fn dim(&self) -> usize;
    /// Map every `s` and `s_next`; the result is tagged noisy.
    fn corrupt(&self, buffer: &DemoBuffer) -> Result<DemoBuffer>;
}

impl StateNoise for LtiNoise {
    fn dim(&self) -> usize {
        LtiNoise::dim(self)
    }

    fn corrupt(&self, buffer: &DemoBuffer) -> Result<DemoBuffer> {
        corrupt_with(buffer, |_| self)
    }
}

pub(crate) fn corrupt_with<'a>(buffer: &DemoBuffer, pick: impl Fn(usize) -> &'a LtiNoise) -> Result<DemoBuffer> {
    if buffer.noise_level != NoiseLevel::Pure {
        return Err(Error::Input("buffer is already in the noisy domain".into()));
    }
    let mut out = buffer.clone();
    let mut ordinal = 0;
    let mut prev_episode = None;
    for (i, r) in out.records.iter_mut().enumerate() {
        if prev_episode.is_some_and(|e| e != r.episode_id) {
            ordinal += 1;
        }
        prev_episode = Some(r.episode_id);
        let op = pick(ordinal);
        r.s = op.apply(&r.s).map_err(|e| Error::Shape(format!("record {i}: {e}")))?;
        r.s_next = op.apply(&r.s_next)?;
    }
    out.noise_level = NoiseLevel::Noisy;
    Ok(out)
}

pub fn corrupt_buffer(buffer: &DemoBuffer, noise: &(impl StateNoise + ?Sized)) -> Result<DemoBuffer> {
    if noise.dim() != buffer.state_dim {
        return Err(Error::Shape(format!(
            "noise dim {} does not match buffer state dim {}",
            noise.dim(),
            buffer.state_dim
        )));
    }
    noise.corrupt(buffer)
}
