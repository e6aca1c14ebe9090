//! `.p3m` model files: one line of JSON header, then the parameters as
//! little-endian f32.

use super::baseline::BaselineModel;
use super::cnn::{Architecture, CnnModel};
use super::ModelError;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel {
    Cnn(CnnModel),
    Baseline(BaselineModel),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Descriptor {
    Cnn { architecture: Architecture },
    Baseline,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    seed: u64,
    param_count: usize,
    #[serde(flatten)]
    descriptor: Descriptor,
}

pub fn to_bytes(model: &SavedModel) -> Vec<u8> {
    let (descriptor, seed, params): (Descriptor, u64, Vec<f64>) = match model {
        SavedModel::Cnn(m) => (
            Descriptor::Cnn {
                architecture: m.arch.clone(),
            },
            m.seed,
            m.params.clone(),
        ),
        SavedModel::Baseline(m) => {
            let mut p = m.weights.to_vec();
            p.push(m.bias);
            (Descriptor::Baseline, m.seed, p)
        }
    };
    let header = Header {
        format: "p3m".into(),
        version: FORMAT_VERSION,
        seed,
        param_count: params.len(),
        descriptor,
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    for p in params {
        out.extend_from_slice(&(p as f32).to_le_bytes());
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<SavedModel, ModelError> {
    let split = bytes
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| ModelError::Header("missing header terminator".into()))?;
    let header: Header =
        serde_json::from_slice(&bytes[..split]).map_err(|e| ModelError::Header(e.to_string()))?;
    if header.format != "p3m" {
        return Err(ModelError::Header(format!(
            "unknown format {:?}",
            header.format
        )));
    }
    if header.version != FORMAT_VERSION {
        return Err(ModelError::Version(header.version));
    }
    let payload = &bytes[split + 1..];
    let expected = header.param_count * 4;
    if payload.len() < expected {
        return Err(ModelError::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() != expected {
        return Err(ModelError::CorruptedLength {
            expected: header.param_count,
            found: payload.len() / 4,
        });
    }
    let params: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    match header.descriptor {
        Descriptor::Cnn { architecture } => Ok(SavedModel::Cnn(CnnModel::from_params(
            architecture,
            header.seed,
            params,
        )?)),
        Descriptor::Baseline => {
            if params.len() != 4 {
                return Err(ModelError::CorruptedLength {
                    expected: 4,
                    found: params.len(),
                });
            }
            Ok(SavedModel::Baseline(BaselineModel {
                weights: [params[0], params[1], params[2]],
                bias: params[3],
                trained: true,
                seed: header.seed,
            }))
        }
    }
}

pub fn save_model(path: &Path, model: &SavedModel) -> Result<(), ModelError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<SavedModel, ModelError> {
    from_bytes(&std::fs::read(path)?)
}
