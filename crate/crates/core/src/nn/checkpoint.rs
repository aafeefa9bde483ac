//! Textual network checkpoints.
//!
//! Layout (JSON, version 1):
//!
//! ```text
//! {
//!   "format": "dida-dense-net",
//!   "version": 1,
//!   "head": "linear" | "sigmoid" | "gaussian-policy",
//!   "hidden_activation": "tanh",
//!   "layers": [ { "shape": [out, in], "weight": [row-major f64...], "bias": [f64...] }, ... ],
//!   "log_std": [f64...] | null
//! }
//! ```
//!
//! Floats are written in shortest round-trip form, so save→load is bit-exact.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::dense::{Dense, DenseNet, HeadKind};
use crate::{io_util, Error, Result};

pub const FORMAT: &str = "dida-dense-net";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    pub shape: [usize; 2],
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetRecord {
    pub format: String,
    pub version: u32,
    pub head: HeadKind,
    pub hidden_activation: String,
    pub layers: Vec<LayerRecord>,
    pub log_std: Option<Vec<f64>>,
}

impl From<&DenseNet> for NetRecord {
    fn from(net: &DenseNet) -> Self {
        Self {
            format: FORMAT.to_owned(),
            version: VERSION,
            head: net.head(),
            hidden_activation: "tanh".to_owned(),
            layers: net
                .layers()
                .iter()
                .map(|l| LayerRecord {
                    shape: [l.out_dim(), l.in_dim()],
                    weight: l.weight.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
            log_std: net.log_std().map(|v| v.to_vec()),
        }
    }
}

impl TryFrom<NetRecord> for DenseNet {
    type Error = Error;

    fn try_from(rec: NetRecord) -> Result<Self> {
        if rec.format != FORMAT || rec.version != VERSION {
            return Err(Error::Input(format!("unsupported checkpoint {} v{}", rec.format, rec.version)));
        }
        if rec.hidden_activation != "tanh" {
            return Err(Error::Input(format!("unsupported activation {}", rec.hidden_activation)));
        }
        let layers = rec
            .layers
            .into_iter()
            .map(|l| {
                let weight = Array2::from_shape_vec((l.shape[0], l.shape[1]), l.weight)
                    .map_err(|e| Error::Shape(e.to_string()))?;
                Ok(Dense { weight, bias: Array1::from(l.bias) })
            })
            .collect::<Result<Vec<_>>>()?;
        DenseNet::from_layers(layers, rec.head, rec.log_std.map(Array1::from))
    }
}

pub fn save_net(net: &DenseNet, path: &Path) -> Result<()> {
    io_util::write_json_atomic(path, &NetRecord::from(net))
}

pub fn load_net(path: &Path) -> Result<DenseNet> {
    let text = std::fs::read_to_string(path)?;
    let rec: NetRecord = serde_json::from_str(&text)?;
    DenseNet::try_from(rec)
}
