//! Versioned checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "SKRFCKPT"
//! version  u32
//! hlen     u64      length of the JSON header in bytes
//! header   hlen     {"kind", "config", "step", "meta", "tensors": [{name, shape, offset}]}
//! data     f64 LE   tensor payloads, offsets counted in elements
//! ```
//!
//! Values are stored as raw `f64` bit patterns, so save/load round-trips bitwise.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use candle_core::{Device, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::DTYPE;

pub const MAGIC: &[u8; 8] = b"SKRFCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub kind: String,
    pub config: serde_json::Value,
    pub step: u64,
    pub meta: serde_json::Value,
    pub tensors: BTreeMap<String, Tensor>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    config: serde_json::Value,
    step: u64,
    meta: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn new(kind: impl Into<String>, config: &impl Serialize, step: u64) -> Result<Self> {
        Ok(Self {
            kind: kind.into(),
            config: serde_json::to_value(config).map_err(|e| corrupt(e.to_string()))?,
            step,
            meta: serde_json::Value::Null,
            tensors: BTreeMap::new(),
        })
    }

    pub fn with_tensors(mut self, prefix: &str, tensors: Vec<(String, Tensor)>) -> Self {
        for (name, t) in tensors {
            self.tensors.insert(format!("{prefix}{name}"), t);
        }
        self
    }

    /// Tensors under `prefix`, with the prefix stripped.
    pub fn section(&self, prefix: &str) -> BTreeMap<String, Tensor> {
        self.tensors
            .iter()
            .filter_map(|(k, v)| k.strip_prefix(prefix).map(|s| (s.to_string(), v.clone())))
            .collect()
    }

    pub fn config_as<T: for<'de> Deserialize<'de>>(&self) -> Result<T> {
        serde_json::from_value(self.config.clone()).map_err(|e| corrupt(format!("config: {e}")))
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(corrupt(format!(
                "expected a {kind} checkpoint, found {}",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut entries = Vec::with_capacity(self.tensors.len());
        let mut payload: Vec<u8> = Vec::new();
        let mut offset = 0usize;
        for (name, t) in &self.tensors {
            let values = t.to_dtype(DTYPE)?.flatten_all()?.to_vec1::<f64>()?;
            entries.push(TensorEntry {
                name: name.clone(),
                shape: t.dims().to_vec(),
                offset,
            });
            offset += values.len();
            payload.reserve(values.len() * 8);
            for v in values {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let header = serde_json::to_vec(&Header {
            kind: self.kind.clone(),
            config: self.config.clone(),
            step: self.step,
            meta: self.meta.clone(),
            tensors: entries,
        })
        .map_err(|e| corrupt(e.to_string()))?;

        let mut out = Vec::with_capacity(20 + header.len() + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], device: &Device) -> Result<Self> {
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(corrupt("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(corrupt(format!("unsupported checkpoint version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let header_end = 20usize
            .checked_add(hlen)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| corrupt("truncated header"))?;
        let header: Header = serde_json::from_slice(&bytes[20..header_end])
            .map_err(|e| corrupt(format!("header: {e}")))?;
        let data = &bytes[header_end..];

        let mut tensors = BTreeMap::new();
        for entry in header.tensors {
            let len: usize = entry.shape.iter().product();
            let start = entry.offset * 8;
            let end = start + len * 8;
            if end > data.len() {
                return Err(corrupt(format!("tensor {} is truncated", entry.name)));
            }
            let values: Vec<f64> = data[start..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.insert(entry.name, Tensor::from_vec(values, entry.shape, device)?);
        }
        Ok(Self {
            kind: header.kind,
            config: header.config,
            step: header.step,
            meta: header.meta,
            tensors,
        })
    }

    /// Writes atomically via a sibling temporary file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("ckpt.tmp");
        fs::write(&tmp, self.to_bytes()?)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, device: &Device) -> Result<Self> {
        let path = path.as_ref();
        let bytes =
            fs::read(path).map_err(|e| corrupt(format!("cannot read {}: {e}", path.display())))?;
        Self::from_bytes(&bytes, device)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_garbage() {
        assert!(Checkpoint::from_bytes(b"nope", &Device::Cpu).is_err());
        let mut bytes = Checkpoint::new("x", &1u8, 0).unwrap().to_bytes().unwrap();
        bytes[8] = 9;
        assert!(Checkpoint::from_bytes(&bytes, &Device::Cpu).is_err());
    }
}
