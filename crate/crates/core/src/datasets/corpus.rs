//! JSON-lines corpus files.
//!
//! Line 1 is a header object; every following line is one
//! [`TransitionRecord`]:
//!
//! ```text
//! {"format":"dida-corpus","version":1,"state_dim":4,"action_dim":2,"horizon":100,
//!  "expertise":"expert","noise_level":"pure","noise_spec":null,"records":5000}
//! {"s":[...],"a":[...],"r":-1.2,"s_next":[...],"episode_id":0,"t":0}
//! ...
//! ```
//!
//! The header's `records` count lets a reader reject truncated files
//! instead of returning a partial buffer.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DemoBuffer, Expertise, NoiseLevel, TransitionRecord};
use crate::{io_util, Error, Result};

pub const FORMAT: &str = "dida-corpus";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusHeader {
    pub format: String,
    pub version: u32,
    pub state_dim: usize,
    pub action_dim: usize,
    pub horizon: usize,
    pub expertise: Expertise,
    pub noise_level: NoiseLevel,
    pub noise_spec: Option<String>,
    pub records: usize,
}

pub fn buffer_to_string(buffer: &DemoBuffer) -> Result<String> {
    let header = CorpusHeader {
        format: FORMAT.to_owned(),
        version: VERSION,
        state_dim: buffer.state_dim,
        action_dim: buffer.action_dim,
        horizon: buffer.horizon,
        expertise: buffer.expertise,
        noise_level: buffer.noise_level,
        noise_spec: buffer.noise_spec.clone(),
        records: buffer.records.len(),
    };
    let mut out = serde_json::to_string(&header)?;
    out.push('\n');
    for r in &buffer.records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn buffer_from_str(text: &str) -> Result<DemoBuffer> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or(Error::Parse { line: 1, message: "empty corpus file".into() })?;
    let header: CorpusHeader =
        serde_json::from_str(first).map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(Error::Parse {
            line: 1,
            message: format!("unsupported corpus format {} v{}", header.format, header.version),
        });
    }
    let mut records = Vec::with_capacity(header.records);
    let mut last_line = 1;
    for (idx, line) in lines {
        last_line = idx + 1;
        let rec: TransitionRecord =
            serde_json::from_str(line).map_err(|e| Error::Parse { line: idx + 1, message: e.to_string() })?;
        records.push(rec);
    }
    if records.len() != header.records {
        return Err(Error::Parse {
            line: last_line + 1,
            message: format!("header declares {} records, found {}", header.records, records.len()),
        });
    }
    let buffer = DemoBuffer {
        records,
        expertise: header.expertise,
        noise_level: header.noise_level,
        state_dim: header.state_dim,
        action_dim: header.action_dim,
        horizon: header.horizon,
        noise_spec: header.noise_spec,
    };
    buffer.validate()?;
    Ok(buffer)
}

pub fn save_buffer(buffer: &DemoBuffer, path: &Path) -> Result<()> {
    io_util::write_atomic(path, buffer_to_string(buffer)?.as_bytes())
}

pub fn load_buffer(path: &Path) -> Result<DemoBuffer> {
    buffer_from_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_buffer(values: &[f64]) -> DemoBuffer {
        let records = values
            .iter()
            .enumerate()
            .map(|(i, &v)| TransitionRecord {
                s: vec![v, -v],
                a: vec![v * 0.5],
                r: if i % 2 == 0 { Some(v) } else { None },
                s_next: vec![v + 1e-17, v * 3.0],
                episode_id: i / 3,
                t: i % 3,
            })
            .collect();
        DemoBuffer::new(records, Expertise::Expert, NoiseLevel::Noisy, 2, 1, 3).unwrap()
    }

    #[test]
    fn truncated_file_is_rejected() {
        let text = buffer_to_string(&sample_buffer(&[0.1, 0.2, 0.3, 0.4])).unwrap();
        let cut_mid_line = &text[..text.len() - 10];
        assert!(matches!(buffer_from_str(cut_mid_line), Err(Error::Parse { .. })));
        let whole_lines: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(matches!(buffer_from_str(&whole_lines), Err(Error::Parse { .. })));
    }

    #[test]
    fn parse_error_reports_line() {
        let mut text = buffer_to_string(&sample_buffer(&[0.1, 0.2])).unwrap();
        text = text.replacen("\"t\":1", "\"t\":\"x\"", 1);
        match buffer_from_str(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn save_load_file() {
        let buf = sample_buffer(&[1.0, 2.0, 3.0]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        save_buffer(&buf, &path).unwrap();
        assert_eq!(load_buffer(&path).unwrap(), buf);
    }

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(values in proptest::collection::vec(-1e9f64..1e9, 1..40)) {
            let buf = sample_buffer(&values);
            let back = buffer_from_str(&buffer_to_string(&buf).unwrap()).unwrap();
            prop_assert_eq!(back, buf);
        }
    }
}
