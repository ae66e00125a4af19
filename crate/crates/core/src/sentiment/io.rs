//! Binary parameter format with a JSON sidecar.
//!
//! Layout: 8-byte magic, `u32` version, `u32` group count, then per group a
//! `u16` name length, the UTF-8 name and a `u64` element count, followed by
//! every group's values as little-endian `f32` in table order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{ModelShape, SentimentModel};
use super::train::TrainConfig;
use super::SentimentError;

pub const MAGIC: &[u8; 8] = b"TWSCNN\0\x01";
pub const FORMAT_VERSION: u32 = 1;

/// Everything besides the weights needed to rebuild and describe a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSidecar {
    pub format_version: u32,
    pub shape: ModelShape,
    pub train: Option<TrainConfig>,
    pub best_epoch: Option<usize>,
}

fn format_err(msg: impl Into<String>) -> SentimentError {
    SentimentError::Format(msg.into())
}

pub fn write_params<W: Write>(model: &SentimentModel, mut out: W) -> Result<(), SentimentError> {
    let groups = model.params.groups(&model.shape);
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(groups.len() as u32).to_le_bytes())?;
    for (name, values) in &groups {
        out.write_all(&(name.len() as u16).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(values.len() as u64).to_le_bytes())?;
    }
    for (_, values) in &groups {
        for v in *values {
            out.write_all(&(*v as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn read_exact<const N: usize>(input: &mut impl Read) -> Result<[u8; N], SentimentError> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf).map_err(|_| format_err("truncated model file"))?;
    Ok(buf)
}

/// Reads parameters for `shape`, rejecting any table that disagrees with it.
pub fn read_params<R: Read>(shape: ModelShape, mut input: R) -> Result<SentimentModel, SentimentError> {
    let mut model = SentimentModel::zeros(shape)?;
    if &read_exact::<8>(&mut input)? != MAGIC {
        return Err(format_err("bad magic"));
    }
    let version = u32::from_le_bytes(read_exact(&mut input)?);
    if version != FORMAT_VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let expected: Vec<(String, usize)> = model
        .params
        .groups(&model.shape)
        .into_iter()
        .map(|(name, v)| (name, v.len()))
        .collect();
    let count = u32::from_le_bytes(read_exact(&mut input)?) as usize;
    if count != expected.len() {
        return Err(format_err(format!("{count} groups, expected {}", expected.len())));
    }
    for (name, len) in &expected {
        let name_len = u16::from_le_bytes(read_exact(&mut input)?) as usize;
        let mut buf = vec![0u8; name_len];
        input.read_exact(&mut buf).map_err(|_| format_err("truncated model file"))?;
        let got_len = u64::from_le_bytes(read_exact(&mut input)?) as usize;
        if buf != name.as_bytes() || got_len != *len {
            return Err(format_err(format!(
                "group {} of {got_len} values does not match {name} of {len}",
                String::from_utf8_lossy(&buf)
            )));
        }
    }
    for group in model.params.groups_mut() {
        for v in group.iter_mut() {
            *v = f32::from_le_bytes(read_exact(&mut input)?) as f64;
        }
    }
    if input.read(&mut [0u8; 1])? != 0 {
        return Err(format_err("trailing bytes after parameters"));
    }
    Ok(model)
}

pub fn save(model: &SentimentModel, sidecar: &ModelSidecar, bin: &Path, json: &Path) -> Result<(), SentimentError> {
    write_params(model, BufWriter::new(File::create(bin)?))?;
    let text = serde_json::to_string_pretty(sidecar).map_err(|e| format_err(e.to_string()))?;
    std::fs::write(json, text + "\n")?;
    Ok(())
}

pub fn load(bin: &Path, json: &Path) -> Result<(SentimentModel, ModelSidecar), SentimentError> {
    let sidecar: ModelSidecar =
        serde_json::from_str(&std::fs::read_to_string(json)?).map_err(|e| format_err(e.to_string()))?;
    let model = read_params(sidecar.shape.clone(), BufReader::new(File::open(bin)?))?;
    Ok((model, sidecar))
}
