//! JSON checkpoints: the config echo followed by every parameter block in
//! [`RankerModel::param_blocks`] order. Floats are written in shortest
//! round-trip form and parsed exactly, so save/load preserves every bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RankerConfig;
use super::model::RankerModel;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "crossdistill-checkpoint/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamBlock {
    name: String,
    values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    format: String,
    seed: u64,
    param_count: usize,
    config: RankerConfig,
    params: Vec<ParamBlock>,
}

pub fn checkpoint_to_string(model: &RankerModel) -> Result<String> {
    let ck = Checkpoint {
        format: CHECKPOINT_FORMAT.to_string(),
        seed: model.config.init_seed,
        param_count: model.param_count(),
        config: model.config.clone(),
        params: model
            .param_blocks()
            .into_iter()
            .map(|(name, values)| ParamBlock {
                name,
                values: values.to_vec(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&ck)?;
    text.push('\n');
    Ok(text)
}

pub fn checkpoint_from_str(text: &str) -> Result<RankerModel> {
    let ck: Checkpoint =
        serde_json::from_str(text).map_err(|e| Error::parse("checkpoint", e.to_string()))?;
    if ck.format != CHECKPOINT_FORMAT {
        return Err(Error::parse(
            "checkpoint",
            format!("unsupported format `{}`", ck.format),
        ));
    }
    let mut model = RankerModel::init(&ck.config)?;
    let expected: Vec<(String, usize)> = model
        .param_blocks()
        .into_iter()
        .map(|(n, b)| (n, b.len()))
        .collect();
    if expected.len() != ck.params.len() {
        return Err(Error::parse(
            "checkpoint",
            format!("{} parameter blocks, config implies {}", ck.params.len(), expected.len()),
        ));
    }
    for ((name, len), block) in expected.iter().zip(&ck.params) {
        if *name != block.name || *len != block.values.len() {
            return Err(Error::parse(
                "checkpoint",
                format!(
                    "block `{}` ({} values) where `{name}` ({len} values) was expected",
                    block.name,
                    block.values.len()
                ),
            ));
        }
    }
    for (dst, block) in model.param_blocks_mut().into_iter().zip(&ck.params) {
        dst.copy_from_slice(&block.values);
    }
    Ok(model)
}

/// Short content hash of a checkpoint's serialized form.
pub fn checkpoint_fingerprint(model: &RankerModel) -> Result<String> {
    let text = checkpoint_to_string(model)?;
    Ok(hex::encode(&Sha256::digest(text.as_bytes())[..8]))
}

pub fn save_checkpoint(model: &RankerModel, path: &Path) -> Result<()> {
    fs::write(path, checkpoint_to_string(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<RankerModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_str(&text)
}
