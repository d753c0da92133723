//! Single-document JSON checkpoints.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabs;
use crate::error::{Error, Result};
use crate::models::{EventModel, ModelConfig};
use crate::numcore::Tensor;

pub const CHECKPOINT_FORMAT: &str = "dgt-ckpt-v1";

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    config: ModelConfig,
    vocab_hashes: BTreeMap<String, String>,
    vocabs: Vocabs,
    param_count: usize,
    params: BTreeMap<String, Tensor>,
}

/// A trained model together with the vocabularies it was trained on.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: EventModel,
    pub vocabs: Vocabs,
}

pub fn checkpoint_to_json(model: &EventModel, vocabs: &Vocabs) -> Result<String> {
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.to_string(),
        config: model.config().clone(),
        vocab_hashes: vocabs.hashes(),
        vocabs: vocabs.clone(),
        param_count: model.params().scalar_count(),
        params: model.params().iter().map(|(_, n, t)| (n.to_string(), t.clone())).collect(),
    };
    Ok(serde_json::to_string(&file)?)
}

pub fn checkpoint_from_json(text: &str) -> Result<Checkpoint> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::Checkpoint(format!("unreadable checkpoint: {e}")))?;
    match value.get("format").and_then(|f| f.as_str()) {
        Some(CHECKPOINT_FORMAT) => {}
        Some(other) => {
            return Err(Error::Checkpoint(format!(
                "unsupported format `{other}`, expected `{CHECKPOINT_FORMAT}`"
            )))
        }
        None => return Err(Error::Checkpoint("missing format tag".into())),
    }
    let file: CheckpointFile = serde_json::from_value(value)
        .map_err(|e| Error::Checkpoint(format!("malformed checkpoint: {e}")))?;
    if file.vocabs.hashes() != file.vocab_hashes {
        return Err(Error::Checkpoint("vocabulary hashes do not match stored vocabularies".into()));
    }
    let mut model = EventModel::new(file.config)?;
    if model.params().len() != file.params.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {} parameters, model expects {}",
            file.params.len(),
            model.params().len()
        )));
    }
    let ids: Vec<_> = model.params().ids().collect();
    for id in ids {
        let name = model.params().name(id).to_string();
        let stored = file
            .params
            .get(&name)
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))?;
        let slot = model.params_mut().get_mut(id);
        if slot.shape() != stored.shape() || stored.numel() != slot.numel() {
            return Err(Error::Checkpoint(format!(
                "parameter `{name}` has shape {:?}, expected {:?}",
                stored.shape(),
                slot.shape()
            )));
        }
        *slot = stored.clone();
    }
    if model.params().scalar_count() != file.param_count {
        return Err(Error::Checkpoint(format!(
            "manifest lists {} scalars, parameters hold {}",
            file.param_count,
            model.params().scalar_count()
        )));
    }
    Ok(Checkpoint { model, vocabs: file.vocabs })
}

pub fn save_checkpoint(model: &EventModel, vocabs: &Vocabs, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, checkpoint_to_json(model, vocabs)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_json(&text)
}
