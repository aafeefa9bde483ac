//! CSV export of encoder embeddings with noise-discriminator outputs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::pacc::buffer_states;
use crate::datasets::DemoBuffer;
use crate::dida::{confusion_distribution, DidaNets};
use crate::io_util::write_atomic;
use crate::{Error, Result};

/// Mean noise-discriminator output of one exported buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferSummary {
    pub tag: String,
    pub rows: usize,
    pub mean_d_n: f64,
}

/// Per-buffer rows `tag, index, z1..zd, d_n, p_das`. `p_das` is the clipped,
/// normalized confusion weight within the row's own buffer.
pub fn embeddings_csv(nets: &DidaNets, buffers: &[(&str, &DemoBuffer)], confusion_clip: (f64, f64)) -> Result<(String, Vec<BufferSummary>)> {
    let d = nets.embed_dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["buffer".to_owned(), "index".to_owned()];
    header.extend((1..=d).map(|k| format!("z{k}")));
    header.extend(["d_n".to_owned(), "p_das".to_owned()]);
    w.write_record(&header).map_err(csv_err)?;
    let mut summaries = Vec::with_capacity(buffers.len());
    for (tag, buffer) in buffers {
        if buffer.is_empty() {
            summaries.push(BufferSummary { tag: (*tag).to_owned(), rows: 0, mean_d_n: f64::NAN });
            continue;
        }
        let z = nets.encoder.predict(buffer_states(buffer).view())?;
        let probs = nets.noise_disc.predict(z.view())?.column(0).to_vec();
        let weights = confusion_distribution(&probs, confusion_clip)?;
        for (i, row) in z.rows().into_iter().enumerate() {
            let mut rec = vec![(*tag).to_owned(), i.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            rec.push(probs[i].to_string());
            rec.push(weights[i].to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
        summaries.push(BufferSummary {
            tag: (*tag).to_owned(),
            rows: buffer.len(),
            mean_d_n: probs.iter().sum::<f64>() / probs.len() as f64,
        });
    }
    let bytes = w.into_inner().map_err(|e| Error::Input(e.to_string()))?;
    Ok((String::from_utf8(bytes).expect("csv output is utf-8"), summaries))
}

pub fn export_embeddings(
    nets: &DidaNets,
    buffers: &[(&str, &DemoBuffer)],
    confusion_clip: (f64, f64),
    path: &Path,
) -> Result<Vec<BufferSummary>> {
    let (text, summaries) = embeddings_csv(nets, buffers, confusion_clip)?;
    write_atomic(path, text.as_bytes())?;
    Ok(summaries)
}

/// Largest pairwise gap between per-buffer mean `D_n` outputs.
pub fn confusion_gap(summaries: &[BufferSummary]) -> f64 {
    let means: Vec<f64> = summaries.iter().filter(|s| s.rows > 0).map(|s| s.mean_d_n).collect();
    let hi = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
    if means.is_empty() { 0.0 } else { hi - lo }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Input(format!("csv: {other:?}")),
    }
}
