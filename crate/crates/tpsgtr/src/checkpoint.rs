//! Checkpoint files: one JSON object holding the architecture, dimensions,
//! vocabulary and every named parameter tensor.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tpsgtr_core::decoder::{Arch, Dims, ModelParams, ModelSpec, Param, Pooling};
use tpsgtr_core::numerics::Tensor;
use tpsgtr_core::training::{Checkpoint, CHECKPOINT_VERSION};
use tpsgtr_core::vocab::Vocab;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimsJson {
    pub feature: usize,
    pub roles: usize,
    pub role_columns: [usize; 3],
    pub global: usize,
    pub tags: usize,
    pub embed: usize,
    pub hidden: usize,
    pub attention: usize,
    pub vocab: usize,
}

impl From<Dims> for DimsJson {
    fn from(d: Dims) -> Self {
        DimsJson {
            feature: d.feature,
            roles: d.roles,
            role_columns: d.role_columns,
            global: d.global,
            tags: d.tags,
            embed: d.embed,
            hidden: d.hidden,
            attention: d.attention,
            vocab: d.vocab,
        }
    }
}

impl From<DimsJson> for Dims {
    fn from(d: DimsJson) -> Self {
        Dims {
            feature: d.feature,
            roles: d.roles,
            role_columns: d.role_columns,
            global: d.global,
            tags: d.tags,
            embed: d.embed,
            hidden: d.hidden,
            attention: d.attention,
            vocab: d.vocab,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorJson {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointJson {
    pub format_version: u64,
    pub arch: String,
    pub pooling: String,
    pub dims: DimsJson,
    pub vocab: Vec<String>,
    pub seed: u64,
    pub epoch: usize,
    pub params: BTreeMap<String, TensorJson>,
}

impl From<&Checkpoint> for CheckpointJson {
    fn from(c: &Checkpoint) -> Self {
        let spec = c.params.spec();
        CheckpointJson {
            format_version: CHECKPOINT_VERSION.into(),
            arch: spec.arch.name().into(),
            pooling: spec.pooling.name().into(),
            dims: spec.dims.into(),
            vocab: c.vocab.tokens().to_vec(),
            seed: c.seed,
            epoch: c.epoch,
            params: c
                .params
                .iter()
                .map(|(p, t)| {
                    let json = TensorJson {
                        shape: t.shape().to_vec(),
                        data: t.data().to_vec(),
                    };
                    (p.name().to_string(), json)
                })
                .collect(),
        }
    }
}

pub fn checkpoint_to_string(c: &Checkpoint) -> String {
    let mut s = serde_json::to_string(&CheckpointJson::from(c)).expect("checkpoints serialize");
    s.push('\n');
    s
}

pub fn save_checkpoint(c: &Checkpoint, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint_to_string(c)).map_err(CliError::io(path))
}

/// Parses checkpoint text; `path` only labels errors.
pub fn checkpoint_from_str(text: &str, path: &Path) -> Result<Checkpoint> {
    let corrupt = |msg: String| CliError::Corrupt {
        path: path.to_path_buf(),
        msg,
    };
    // read the version before the layout so a newer file is reported as such
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
    let found = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| corrupt("missing format_version".into()))?;
    let expected = u64::from(CHECKPOINT_VERSION);
    if found != expected {
        return Err(CliError::Version {
            path: path.to_path_buf(),
            found,
            expected,
        });
    }
    let json: CheckpointJson = serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))?;
    let arch = Arch::parse(&json.arch).map_err(|e| corrupt(e.to_string()))?;
    let pooling = Pooling::parse(&json.pooling).map_err(|e| corrupt(e.to_string()))?;
    let spec = ModelSpec::new(arch, json.dims.into()).with_pooling(pooling);
    spec.dims.validate(arch).map_err(|e| corrupt(e.to_string()))?;

    let mut tensors = BTreeMap::new();
    for (name, t) in json.params {
        let p = Param::from_name(&name).ok_or_else(|| CliError::Shape(format!("unknown parameter {name:?}")))?;
        let tensor = Tensor::new(t.shape, t.data).map_err(|e| CliError::Shape(format!("{name}: {e}")))?;
        tensors.insert(p, tensor);
    }
    let params = ModelParams::from_tensors(spec, tensors)?;
    let vocab = Vocab::new(json.vocab).map_err(|e| corrupt(e.to_string()))?;
    Ok(Checkpoint::new(params, vocab, json.seed, json.epoch)?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    checkpoint_from_str(&text, path)
}
