//! Noise operator files.
//!
//! Single operator:
//! `{"kind":"gaussian","mu":0.0,"sigma":0.1,"dim":4,"seed":7,"A":[...],"B":[...]}`
//! with `A` stored row-major. `mu`/`sigma` appear only for the Gaussian
//! family. A combined operator is
//! `{"kind":"combined","dim":4,"seed":7,"parts":[<single>...],"assignment":[...]}`.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{CombinedNoise, LtiNoise, NoiseKind, StateNoise};
use crate::datasets::DemoBuffer;
use crate::{io_util, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseOperator {
    Lti(LtiNoise),
    Combined(CombinedNoise),
}

impl NoiseOperator {
    pub fn seed(&self) -> Option<u64> {
        match self {
            NoiseOperator::Lti(op) => op.seed(),
            NoiseOperator::Combined(op) => op.seed(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            NoiseOperator::Lti(op) => op.kind().name().to_owned(),
            NoiseOperator::Combined(_) => "combined".to_owned(),
        }
    }

    /// The operator applied to states collected outside the partitioned
    /// corpus; for a combined operator this is the part of the first
    /// episode.
    pub fn representative(&self) -> &LtiNoise {
        match self {
            NoiseOperator::Lti(op) => op,
            NoiseOperator::Combined(op) => &op.parts()[op.assignment().first().copied().unwrap_or(0)],
        }
    }
}

impl From<LtiNoise> for NoiseOperator {
    fn from(op: LtiNoise) -> Self {
        NoiseOperator::Lti(op)
    }
}

impl From<CombinedNoise> for NoiseOperator {
    fn from(op: CombinedNoise) -> Self {
        NoiseOperator::Combined(op)
    }
}

impl StateNoise for NoiseOperator {
    fn dim(&self) -> usize {
        match self {
            NoiseOperator::Lti(op) => StateNoise::dim(op),
            NoiseOperator::Combined(op) => op.dim(),
        }
    }

    fn corrupt(&self, buffer: &DemoBuffer) -> Result<DemoBuffer> {
        match self {
            NoiseOperator::Lti(op) => op.corrupt(buffer),
            NoiseOperator::Combined(op) => op.corrupt(buffer),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LtiRecord {
    #[serde(flatten)]
    kind: NoiseKind,
    dim: usize,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(rename = "A")]
    a: Vec<f64>,
    #[serde(rename = "B")]
    b: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CombinedRecord {
    kind: String,
    dim: usize,
    #[serde(default)]
    seed: Option<u64>,
    parts: Vec<LtiRecord>,
    assignment: Vec<usize>,
}

impl From<&LtiNoise> for LtiRecord {
    fn from(op: &LtiNoise) -> Self {
        Self {
            kind: op.kind(),
            dim: op.dim(),
            seed: op.seed(),
            a: op.a().iter().copied().collect(),
            b: op.b().to_vec(),
        }
    }
}

impl TryFrom<LtiRecord> for LtiNoise {
    type Error = Error;

    fn try_from(r: LtiRecord) -> Result<Self> {
        let a = Array2::from_shape_vec((r.dim, r.dim), r.a)
            .map_err(|e| Error::Shape(format!("A does not fit dim {}: {e}", r.dim)))?;
        LtiNoise::from_parts(r.kind, a, Array1::from(r.b), r.seed)
    }
}

pub fn noise_to_string(op: &NoiseOperator) -> Result<String> {
    let text = match op {
        NoiseOperator::Lti(op) => serde_json::to_string_pretty(&LtiRecord::from(op))?,
        NoiseOperator::Combined(op) => serde_json::to_string_pretty(&CombinedRecord {
            kind: "combined".into(),
            dim: op.dim(),
            seed: op.seed(),
            parts: op.parts().iter().map(LtiRecord::from).collect(),
            assignment: op.assignment().to_vec(),
        })?,
    };
    Ok(text + "\n")
}

pub fn noise_from_str(text: &str) -> Result<NoiseOperator> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("kind").and_then(|k| k.as_str()) == Some("combined") {
        let rec: CombinedRecord = serde_json::from_value(value)?;
        let parts = rec.parts.into_iter().map(LtiNoise::try_from).collect::<Result<Vec<_>>>()?;
        if parts.iter().any(|p| p.dim() != rec.dim) {
            return Err(Error::Shape(format!("combined parts do not match dim {}", rec.dim)));
        }
        Ok(NoiseOperator::Combined(CombinedNoise::from_parts(parts, rec.assignment, rec.seed)?))
    } else {
        let rec: LtiRecord = serde_json::from_value(value)?;
        Ok(NoiseOperator::Lti(LtiNoise::try_from(rec)?))
    }
}

pub fn save_noise(op: &NoiseOperator, path: &Path) -> Result<()> {
    io_util::write_atomic(path, noise_to_string(op)?.as_bytes())
}

pub fn load_noise(path: &Path) -> Result<NoiseOperator> {
    noise_from_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_operators_roundtrip() {
        for (i, kind) in [
            NoiseKind::Gaussian { mu: 0.2, sigma: 0.3 },
            NoiseKind::Normal,
            NoiseKind::DoublyStochastic,
            NoiseKind::Shuffle,
            NoiseKind::Identity,
        ]
        .into_iter()
        .enumerate()
        {
            let op: NoiseOperator = LtiNoise::sample_seeded(kind, 4, i as u64).unwrap().into();
            let text = noise_to_string(&op).unwrap();
            assert_eq!(noise_from_str(&text).unwrap(), op);
        }
    }

    #[test]
    fn gaussian_file_layout() {
        let op: NoiseOperator = LtiNoise::sample_seeded(NoiseKind::gaussian_default(), 2, 9).unwrap().into();
        let v: serde_json::Value = serde_json::from_str(&noise_to_string(&op).unwrap()).unwrap();
        assert_eq!(v["kind"], "gaussian");
        assert_eq!(v["sigma"], 0.1);
        assert_eq!(v["seed"], 9);
        assert_eq!(v["A"].as_array().unwrap().len(), 4);
        assert_eq!(v["B"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn combined_roundtrip_via_file() {
        let op: NoiseOperator = CombinedNoise::sample_seeded(NoiseKind::gaussian_default(), 4, 50, 3).unwrap().into();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("noise.json");
        save_noise(&op, &path).unwrap();
        assert_eq!(load_noise(&path).unwrap(), op);
    }

    #[test]
    fn tampered_operator_is_rejected() {
        let text = r#"{"kind":"shuffle","dim":2,"A":[1.0,1.0,0.0,0.0],"B":[0.0,0.0]}"#;
        assert!(noise_from_str(text).is_err());
        let text = r#"{"kind":"identity","dim":2,"A":[1.0,0.0,0.0],"B":[0.0,0.0]}"#;
        assert!(matches!(noise_from_str(text), Err(Error::Shape(_))));
    }
}
