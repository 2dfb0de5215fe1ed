//! Checkpoint file format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! bytes 0..4    magic "FLM1"
//! bytes 4..8    u32 format version (currently 1)
//! bytes 8..16   u64 manifest length in bytes
//! ...           JSON manifest (UTF-8)
//! ...           raw tensor data: IEEE-754 f64, little-endian, packed in
//!               manifest order
//! ```
//!
//! The manifest lists every tensor as `{name, shape, dtype, offset}` with
//! `offset` counted from the start of the data section, plus a `meta` object
//! carrying the training step. Round-trips are bitwise lossless.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{LabError, Result};

pub const MAGIC: &[u8; 4] = b"FLM1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    meta: Meta,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Meta {
    step: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    offset: u64,
}

/// One tensor ready to be written or just read back.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug)]
pub struct Checkpoint {
    pub step: u64,
    pub tensors: Vec<Tensor>,
}

pub fn save(path: &Path, step: u64, tensors: &[(String, Vec<usize>, &[f64])]) -> Result<()> {
    let mut entries = Vec::with_capacity(tensors.len());
    let mut offset = 0u64;
    for (name, shape, data) in tensors {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(LabError::data(format!(
                "tensor {name}: shape {shape:?} does not cover {} scalars",
                data.len()
            )));
        }
        entries.push(TensorEntry {
            name: name.clone(),
            shape: shape.clone(),
            dtype: "f64".into(),
            offset,
        });
        offset += (data.len() * 8) as u64;
    }
    let manifest = Manifest {
        meta: Meta { step },
        tensors: entries,
    };
    let manifest_bytes = serde_json::to_vec(&manifest)
        .map_err(|e| LabError::data(format!("manifest serialization failed: {e}")))?;

    let mut out = Vec::with_capacity(16 + manifest_bytes.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(manifest_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&manifest_bytes);
    for (_, _, data) in tensors {
        for v in *data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, &out)
        .map_err(|e| LabError::data(format!("cannot write checkpoint {}: {e}", path.display())))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path)
        .map_err(|e| LabError::data(format!("cannot read checkpoint {}: {e}", path.display())))?;
    if bytes.len() < 16 {
        return Err(LabError::data("checkpoint truncated: missing header"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(LabError::data("not a checkpoint file (bad magic)"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(LabError::data(format!(
            "unsupported checkpoint version {version} (expected {VERSION})"
        )));
    }
    let manifest_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let data_start = 16 + manifest_len;
    if bytes.len() < data_start {
        return Err(LabError::data("checkpoint truncated: manifest cut short"));
    }
    let manifest: Manifest = serde_json::from_slice(&bytes[16..data_start])
        .map_err(|e| LabError::data(format!("checkpoint manifest invalid: {e}")))?;
    let data = &bytes[data_start..];

    let mut tensors = Vec::with_capacity(manifest.tensors.len());
    for entry in &manifest.tensors {
        if entry.dtype != "f64" {
            return Err(LabError::data(format!(
                "tensor {}: unsupported dtype {}",
                entry.name, entry.dtype
            )));
        }
        let count: usize = entry.shape.iter().product();
        let start = entry.offset as usize;
        let end = start + count * 8;
        if end > data.len() {
            return Err(LabError::data(format!(
                "checkpoint truncated: tensor {} wants bytes {start}..{end} of {}",
                entry.name,
                data.len()
            )));
        }
        let mut values = Vec::with_capacity(count);
        for chunk in data[start..end].chunks_exact(8) {
            values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        tensors.push(Tensor {
            name: entry.name.clone(),
            shape: entry.shape.clone(),
            data: values,
        });
    }
    Ok(Checkpoint {
        step: manifest.meta.step,
        tensors,
    })
}
