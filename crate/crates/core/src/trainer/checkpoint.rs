//! Checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "ATSNCKPT"
//! header_len u64
//! header     header_len bytes of UTF-8 JSON
//! tensors    f32 values, one blob per header tensor entry, in header order
//! ```
//!
//! The header carries the format version, model and training configuration,
//! the vocabulary hash, the epoch, metrics at save time, and the name and
//! shape of every tensor blob.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{Model, ModelConfig, ModelParams, ParamGroup};

use super::{Metrics, TrainConfig};

pub const MAGIC: &[u8; 8] = b"ATSNCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub train_config: TrainConfig,
    pub vocab_hash: String,
    pub epoch: usize,
    pub metrics: Option<Metrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Header {
    pub version: u32,
    pub model: ModelConfig,
    pub train_config: TrainConfig,
    pub vocab_hash: String,
    pub epoch: usize,
    pub metrics: Option<Metrics>,
    pub tensors: Vec<TensorEntry>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let params = &self.model.params;
        let tensors = ParamGroup::ALL
            .iter()
            .map(|&g| {
                let (rows, cols) = params.group_shape(g);
                TensorEntry { name: g.name().to_string(), rows, cols }
            })
            .collect();
        let header = Header {
            version: FORMAT_VERSION,
            model: self.model.config.clone(),
            train_config: self.train_config.clone(),
            vocab_hash: self.vocab_hash.clone(),
            epoch: self.epoch,
            metrics: self.metrics.clone(),
            tensors,
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(16 + json.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for g in ParamGroup::ALL {
            for x in params.group(g) {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let err = |m: String| Error::Checkpoint(m);
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(err("not a checkpoint file (bad magic)".into()));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = &bytes[16..];
        if body.len() < header_len {
            return Err(err(format!("header truncated: {header_len} bytes declared, {} present", body.len())));
        }
        let header: Header = serde_json::from_slice(&body[..header_len])
            .map_err(|e| err(format!("unreadable header: {e}")))?;
        if header.version != FORMAT_VERSION {
            return Err(err(format!(
                "format version {} is not supported (expected {FORMAT_VERSION})",
                header.version
            )));
        }

        let mut params = ModelParams::<f32>::zeros(&header.model);
        if header.tensors.len() != ParamGroup::ALL.len() {
            return Err(err(format!("{} tensors declared, expected {}", header.tensors.len(), ParamGroup::ALL.len())));
        }
        for (entry, g) in header.tensors.iter().zip(ParamGroup::ALL) {
            if entry.name != g.name() || (entry.rows, entry.cols) != params.group_shape(g) {
                return Err(err(format!(
                    "tensor {} {}x{} does not match model {} {:?}",
                    entry.name,
                    entry.rows,
                    entry.cols,
                    g.name(),
                    params.group_shape(g)
                )));
            }
        }
        let blobs = &body[header_len..];
        let expected: usize = header.tensors.iter().map(|t| t.rows * t.cols * 4).sum();
        if blobs.len() != expected {
            return Err(err(format!(
                "tensor data is {} bytes, header declares {expected} bytes",
                blobs.len()
            )));
        }
        let mut offset = 0;
        for g in ParamGroup::ALL {
            for x in params.group_mut(g) {
                *x = f32::from_le_bytes(blobs[offset..offset + 4].try_into().expect("4 bytes"));
                offset += 4;
            }
        }
        Ok(Checkpoint {
            model: Model::new(header.model, params),
            train_config: header.train_config,
            vocab_hash: header.vocab_hash,
            epoch: header.epoch,
            metrics: header.metrics,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Fails unless the checkpoint was trained against `vocab_hash`.
    pub fn check_vocab(&self, vocab_hash: &str) -> Result<()> {
        if self.vocab_hash != vocab_hash {
            return Err(Error::VocabMismatch {
                expected: self.vocab_hash.clone(),
                found: vocab_hash.to_string(),
            });
        }
        Ok(())
    }
}
