//! Parameter checkpoints: JSON maps of named tensors with a format-version
//! field, shared by the forecaster and trainer state files.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{AdError, Result};
use crate::tensor::Tensor;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorRecord {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    params: BTreeMap<String, TensorRecord>,
}

pub fn to_json(params: &BTreeMap<String, Tensor>) -> String {
    let file = CheckpointFile {
        format_version: FORMAT_VERSION,
        params: params
            .iter()
            .map(|(k, t)| {
                (k.clone(), TensorRecord { shape: t.shape().to_vec(), data: t.data().to_vec() })
            })
            .collect(),
    };
    serde_json::to_string(&file).expect("checkpoint serialization cannot fail")
}

pub fn from_json(s: &str) -> Result<BTreeMap<String, Tensor>> {
    let file: CheckpointFile =
        serde_json::from_str(s).map_err(|e| AdError::Checkpoint(e.to_string()))?;
    if file.format_version != FORMAT_VERSION {
        return Err(AdError::Checkpoint(format!(
            "unsupported format_version {} (expected {FORMAT_VERSION})",
            file.format_version
        )));
    }
    let mut out = BTreeMap::new();
    for (name, rec) in file.params {
        if rec.shape.iter().product::<usize>() != rec.data.len() {
            return Err(AdError::Checkpoint(format!(
                "tensor '{name}': shape {:?} does not match data length {}",
                rec.shape,
                rec.data.len()
            )));
        }
        out.insert(name, Tensor::new(rec.shape, rec.data));
    }
    Ok(out)
}
