//! Binary checkpoint layout (all integers little-endian):
//!
//! ```text
//! "SNTC" | u32 version | u32 header_len | header JSON (UTF-8) | tensor data
//! ```
//!
//! Tensor data is every parameter tensor in canonical order, row-major, as
//! f64 or f32 according to the header `dtype`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::model::{ModelConfig, ModelKind, ModelParams};
use crate::nn::Parameters;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SNTC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    #[default]
    F64,
    F32,
}

impl Dtype {
    fn width(self) -> usize {
        match self {
            Dtype::F64 => 8,
            Dtype::F32 => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    /// Digest of the vocabulary the embedding rows refer to.
    pub vocab_digest: String,
    pub epoch: usize,
    pub seed: u64,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn kind(&self) -> ModelKind {
        self.params.kind
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    kind: ModelKind,
    config: ModelConfig,
    vocab_digest: String,
    epoch: usize,
    seed: u64,
    vocab_size: usize,
    dtype: Dtype,
    tensors: Vec<TensorInfo>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorInfo {
    name: String,
    shape: Vec<usize>,
}

/// Serializes `ckpt`. F32 output rounds every parameter to nearest.
pub fn encode_checkpoint(ckpt: &Checkpoint, dtype: Dtype) -> Vec<u8> {
    let tensors = ckpt.params.named_tensors();
    let header = Header {
        kind: ckpt.params.kind,
        config: ckpt.config,
        vocab_digest: ckpt.vocab_digest.clone(),
        epoch: ckpt.epoch,
        seed: ckpt.seed,
        vocab_size: ckpt.params.vocab_size(),
        dtype,
        tensors: tensors
            .iter()
            .map(|(n, t)| TensorInfo {
                name: n.to_string(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let total: usize = tensors.iter().map(|(_, t)| t.len()).sum();

    let mut out = Vec::with_capacity(12 + header.len() + total * dtype.width());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for (_, t) in &tensors {
        for &v in t.data() {
            match dtype {
                Dtype::F64 => out.extend_from_slice(&v.to_le_bytes()),
                Dtype::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            }
        }
    }
    out
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>, dtype: Dtype) -> Result<()> {
    write_atomic(path.as_ref(), &encode_checkpoint(ckpt, dtype))
}

/// Parses checkpoint bytes. `origin` only labels errors.
pub fn decode_checkpoint(bytes: &[u8], origin: &Path) -> Result<Checkpoint> {
    let truncated = |detail: String| Error::CheckpointTruncated {
        path: origin.to_path_buf(),
        detail,
    };
    let header_err = |detail: String| Error::CheckpointHeader {
        path: origin.to_path_buf(),
        detail,
    };

    if bytes.len() < 4 {
        if CHECKPOINT_MAGIC.starts_with(bytes) {
            return Err(truncated(format!("{} bytes, shorter than the magic", bytes.len())));
        }
        return Err(Error::CheckpointMagic {
            path: origin.to_path_buf(),
        });
    }
    if &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::CheckpointMagic {
            path: origin.to_path_buf(),
        });
    }
    let u32_at = |at: usize, what: &str| -> Result<u32> {
        bytes
            .get(at..at + 4)
            .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
            .ok_or_else(|| truncated(format!("missing {what}")))
    };
    let version = u32_at(4, "version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion {
            path: origin.to_path_buf(),
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let header_len = u32_at(8, "header length")? as usize;
    let header_bytes = bytes
        .get(12..12 + header_len)
        .ok_or_else(|| truncated(format!("header needs {header_len} bytes, {} present", bytes.len() - 12)))?;
    let header: Header = serde_json::from_slice(header_bytes).map_err(|e| header_err(e.to_string()))?;

    header.config.validate().map_err(|e| header_err(e.to_string()))?;
    let mut params = ModelParams::zeros(header.kind, &header.config, header.vocab_size);
    let expected: Vec<(String, Vec<usize>)> = params
        .named_tensors()
        .iter()
        .map(|(n, t)| (n.to_string(), t.shape().to_vec()))
        .collect();
    let listed: Vec<(String, Vec<usize>)> = header
        .tensors
        .iter()
        .map(|t| (t.name.clone(), t.shape.clone()))
        .collect();
    if listed != expected {
        return Err(header_err(format!(
            "tensor list does not match kind {} with the stored config",
            header.kind
        )));
    }

    let width = header.dtype.width();
    let total: usize = expected.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
    let data = &bytes[12 + header_len..];
    if data.len() < total * width {
        return Err(truncated(format!(
            "tensor data has {} bytes, expected {}",
            data.len(),
            total * width
        )));
    }
    if data.len() > total * width {
        return Err(header_err(format!(
            "{} trailing bytes after tensor data",
            data.len() - total * width
        )));
    }
    let mut chunks = data.chunks_exact(width);
    for (_, t) in params.named_tensors_mut() {
        for v in t.data_mut() {
            let c = chunks.next().expect("length checked");
            *v = match header.dtype {
                Dtype::F64 => f64::from_le_bytes(c.try_into().expect("8 bytes")),
                Dtype::F32 => f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))),
            };
        }
    }
    if !params.is_finite() {
        return Err(Error::NonFinite(format!(
            "parameters of checkpoint {}",
            origin.display()
        )));
    }
    Ok(Checkpoint {
        config: header.config,
        vocab_digest: header.vocab_digest,
        epoch: header.epoch,
        seed: header.seed,
        params,
    })
}

/// Loads a checkpoint; with `vocab_digest` set, refuses one built for a
/// different vocabulary.
pub fn load_checkpoint(path: impl AsRef<Path>, vocab_digest: Option<&str>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let ckpt = decode_checkpoint(&bytes, path)?;
    if let Some(actual) = vocab_digest {
        if actual != ckpt.vocab_digest {
            return Err(Error::CheckpointDigest {
                path: path.to_path_buf(),
                stored: ckpt.vocab_digest,
                actual: actual.to_string(),
            });
        }
    }
    Ok(ckpt)
}
