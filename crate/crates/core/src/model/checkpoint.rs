//! Checkpoint layout: `b"SMCK"`, a little-endian `u32` header length, a
//! JSON header `{"model": ModelConfig, "extra": ...}`, then every tensor
//! in layout order as little-endian `f32`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelParams, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SMCK";

#[derive(Serialize, Deserialize)]
struct Header {
    model: ModelConfig,
    #[serde(default)]
    extra: serde_json::Value,
}

/// Writes `params` and an arbitrary JSON `extra` block. Values are stored
/// as `f32`, so reloading rounds them to single precision.
pub fn save_checkpoint(path: &Path, params: &ModelParams, extra: &serde_json::Value) -> Result<()> {
    let header = serde_json::to_vec(&Header {
        model: params.config().clone(),
        extra: extra.clone(),
    })?;
    let mut buf = Vec::with_capacity(8 + header.len() + 4 * params.num_parameters());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    for t in params.tensors() {
        for &v in &t.data {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Reads a checkpoint. With `expected`, the stored architecture must match
/// it exactly.
pub fn load_checkpoint(path: &Path, expected: Option<&ModelConfig>) -> Result<(ModelParams, serde_json::Value)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!("{} is not a checkpoint", path.display())));
    }
    let hlen = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = bytes
        .get(8..8 + hlen)
        .ok_or_else(|| Error::Checkpoint("truncated header".into()))?;
    let header: Header =
        serde_json::from_slice(body).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    if let Some(exp) = expected {
        if *exp != header.model {
            return Err(Error::ConfigMismatch);
        }
    }
    header
        .model
        .validate()
        .map_err(|e| Error::Checkpoint(e.to_string()))?;

    let mut rest = &bytes[8 + hlen..];
    let layout = header.model.tensor_layout();
    let total: usize = layout.iter().map(|(_, s, _)| s.iter().product::<usize>()).sum();
    if rest.len() != 4 * total {
        return Err(Error::Checkpoint(format!(
            "expected {} bytes of weights, found {}",
            4 * total,
            rest.len()
        )));
    }
    let mut tensors = Vec::with_capacity(layout.len());
    for (name, shape, _) in layout {
        let n: usize = shape.iter().product();
        let (chunk, tail) = rest.split_at(4 * n);
        rest = tail;
        let data = chunk
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        tensors.push(Tensor { name, shape, data });
    }
    let params = ModelParams::from_tensors(&header.model, tensors)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok((params, header.extra))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;

    fn cfg() -> ModelConfig {
        ModelConfig {
            input_channels: 1,
            input_height: 8,
            input_width: 8,
            conv_channels: vec![2, 4],
            kernel_size: 3,
            fc_hidden: 5,
            num_classes: 3,
            weight_init_seed: 9,
        }
    }

    #[test]
    fn round_trip_is_f32_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let p = init_params(&cfg()).unwrap();
        let extra = serde_json::json!({"classes": ["a", "b", "c"]});
        save_checkpoint(&path, &p, &extra).unwrap();
        let (q, e) = load_checkpoint(&path, Some(&cfg())).unwrap();
        assert_eq!(e, extra);
        for (a, b) in p.tensors().iter().zip(q.tensors()) {
            assert_eq!(a.name, b.name);
            for (x, y) in a.data.iter().zip(&b.data) {
                assert_eq!(*x as f32 as f64, *y);
            }
        }
        // Saving the reloaded model is byte-identical.
        let again = dir.path().join("n.ckpt");
        save_checkpoint(&again, &q, &extra).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
    }

    #[test]
    fn mismatched_config_and_corruption_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&path, &init_params(&cfg()).unwrap(), &serde_json::Value::Null).unwrap();
        let other = ModelConfig { num_classes: 4, ..cfg() };
        assert!(matches!(load_checkpoint(&path, Some(&other)), Err(Error::ConfigMismatch)));

        let mut bytes = fs::read(&path).unwrap();
        bytes.pop();
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_checkpoint(&path, None), Err(Error::Checkpoint(_))));
        fs::write(&path, b"RIFF....").unwrap();
        assert!(matches!(load_checkpoint(&path, None), Err(Error::Checkpoint(_))));
    }
}
