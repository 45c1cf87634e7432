//! Checkpoint format: a JSON header (config, step, seed, tensor manifest)
//! next to a raw little-endian `f32` payload holding the tensors in manifest
//! order. Optional Adam moments follow the model tensors as `optim.m.*` /
//! `optim.v.*` entries.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::transformer::{ModelConfig, ParamLayout, Params, Transformer};

const FORMAT: &str = "gatescope-checkpoint-v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub config: ModelConfig,
    pub step: usize,
    pub seed: u64,
    pub dtype: String,
    pub byte_order: String,
    pub payload: String,
    pub payload_sha256: String,
    pub tensors: Vec<TensorManifestEntry>,
    /// Adam step counter when optimizer moments are stored.
    pub optimizer_step: Option<u64>,
}

/// Adam first and second moments, laid out like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub m: Vec<f32>,
    pub v: Vec<f32>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Transformer<f32>,
    pub step: usize,
    pub seed: u64,
    pub optimizer: Option<OptimizerState>,
}

impl Checkpoint {
    fn payload(&self) -> Vec<u8> {
        let mut values: Vec<f32> = self.model.params.data.clone();
        if let Some(opt) = &self.optimizer {
            values.extend_from_slice(&opt.m);
            values.extend_from_slice(&opt.v);
        }
        io::f32_to_le_bytes(values)
    }

    /// Content hash of the payload (model weights and optimizer state).
    pub fn hash(&self) -> String {
        io::sha256_hex(&self.payload())
    }

    /// Writes `<path>` (header) and `<path with .bin>` (payload).
    pub fn save(&self, header_path: &Path) -> Result<()> {
        let payload_path = header_path.with_extension("bin");
        let payload = self.payload();
        let layout = &self.model.params.layout;
        let mut tensors: Vec<TensorManifestEntry> = layout
            .tensors
            .iter()
            .map(|t| TensorManifestEntry {
                name: t.name.clone(),
                shape: t.shape.clone(),
            })
            .collect();
        if self.optimizer.is_some() {
            for prefix in ["optim.m.", "optim.v."] {
                tensors.extend(layout.tensors.iter().map(|t| TensorManifestEntry {
                    name: format!("{prefix}{}", t.name),
                    shape: t.shape.clone(),
                }));
            }
        }
        let header = CheckpointHeader {
            format: FORMAT.into(),
            config: self.model.config.clone(),
            step: self.step,
            seed: self.seed,
            dtype: "f32".into(),
            byte_order: "little".into(),
            payload: payload_path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            payload_sha256: io::sha256_hex(&payload),
            tensors,
            optimizer_step: self.optimizer.as_ref().map(|o| o.step),
        };
        io::write_bytes(&payload_path, &payload)?;
        io::write_json(header_path, &header)
    }

    pub fn load(header_path: &Path) -> Result<Self> {
        let header: CheckpointHeader = io::read_json(header_path)?;
        if header.format != FORMAT || header.dtype != "f32" || header.byte_order != "little" {
            return Err(Error::InvalidInput(format!(
                "unsupported checkpoint {} ({}/{})",
                header.format, header.dtype, header.byte_order
            )));
        }
        header.config.validate()?;
        let payload_path: PathBuf = header_path
            .parent()
            .map(|d| d.join(&header.payload))
            .unwrap_or_else(|| PathBuf::from(&header.payload));
        let bytes = io::read_bytes(&payload_path)?;
        if io::sha256_hex(&bytes) != header.payload_sha256 {
            return Err(Error::InvalidInput(format!(
                "payload {} does not match its recorded hash",
                payload_path.display()
            )));
        }
        let values = io::le_bytes_to_f32(&bytes)?;
        let layout = Arc::new(ParamLayout::new(&header.config));
        let n = layout.total;
        for (entry, info) in header.tensors.iter().zip(&layout.tensors) {
            if entry.name != info.name || entry.shape != info.shape {
                return Err(Error::Shape(format!(
                    "manifest entry {} {:?} does not match model tensor {} {:?}",
                    entry.name, entry.shape, info.name, info.shape
                )));
            }
        }
        let expected = if header.optimizer_step.is_some() { 3 * n } else { n };
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "payload holds {} values, expected {expected}",
                values.len()
            )));
        }
        let optimizer = header.optimizer_step.map(|step| OptimizerState {
            step,
            m: values[n..2 * n].to_vec(),
            v: values[2 * n..].to_vec(),
        });
        let params = Params {
            layout,
            data: values[..n].to_vec(),
        };
        Ok(Self {
            model: Transformer {
                config: header.config,
                params,
            },
            step: header.step,
            seed: header.seed,
            optimizer,
        })
    }
}
