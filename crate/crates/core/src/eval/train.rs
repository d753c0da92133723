use serde::{Deserialize, Serialize};

use crate::corpus::{
    batch_iter, build_vocabs, encode_sentence, EncodedSentence, SentenceExample, Vocabs,
    DEFAULT_MAX_LEN,
};
use crate::error::{Error, Result};
use crate::eval::metrics::{EvalReport, TriggerSet};
use crate::models::{EventModel, ModelConfig, ModelDims, ModelKind};
use crate::numcore::{adam_step, AdamConfig, AdamState, GradStore};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub gtn: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub max_len: usize,
    /// Words seen fewer times in training map to `<unk>`.
    pub min_count: usize,
    pub dims: ModelDims,
    /// Stop after this many epochs without a dev F1 improvement.
    pub patience: Option<usize>,
    /// Stop as soon as dev F1 reaches this value.
    pub target_f1: Option<f64>,
}

impl TrainConfig {
    pub fn new(kind: ModelKind, gtn: bool) -> Self {
        TrainConfig {
            kind,
            gtn,
            epochs: 30,
            batch_size: 10,
            lr: 2e-4,
            seed: 1,
            max_len: DEFAULT_MAX_LEN,
            min_count: 1,
            dims: ModelDims::default(),
            patience: None,
            target_f1: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate {} is not positive", self.lr)));
        }
        if self.max_len == 0 {
            return Err(Error::Config("max_len must be at least 1".into()));
        }
        if self.patience == Some(0) {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub dev: EvalReport,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best dev F1.
    pub model: EventModel,
    pub vocabs: Vocabs,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
}

impl TrainOutcome {
    pub fn best(&self) -> &EpochLog {
        &self.log[self.best_epoch - 1]
    }
}

pub fn encode_all(
    examples: &[SentenceExample],
    vocabs: &Vocabs,
    max_len: usize,
) -> Result<Vec<EncodedSentence>> {
    examples.iter().map(|e| encode_sentence(e, vocabs, max_len)).collect()
}

pub fn gold_triggers(examples: &[SentenceExample]) -> Vec<TriggerSet> {
    examples
        .iter()
        .map(|e| e.triggers.iter().map(|t| (t.index, t.event_type.clone())).collect())
        .collect()
}

/// Tokens whose predicted class is not NONE, with their type names.
pub fn predict_triggers(
    model: &EventModel,
    vocabs: &Vocabs,
    examples: &[SentenceExample],
) -> Result<Vec<TriggerSet>> {
    let max_len = model.config().max_len;
    examples
        .iter()
        .map(|e| {
            let enc = encode_sentence(e, vocabs, max_len)?;
            Ok(model
                .predict(&enc)?
                .into_iter()
                .enumerate()
                .filter(|(_, c)| *c != 0)
                .map(|(i, c)| (i, vocabs.event.token(c).unwrap_or("NONE").to_string()))
                .collect())
        })
        .collect()
}

pub fn evaluate_model(
    model: &EventModel,
    vocabs: &Vocabs,
    examples: &[SentenceExample],
) -> Result<EvalReport> {
    let predicted = predict_triggers(model, vocabs, examples)?;
    EvalReport::from_triggers(&gold_triggers(examples), &predicted)
}

pub fn train(
    config: &TrainConfig,
    train: &[SentenceExample],
    dev: &[SentenceExample],
) -> Result<TrainOutcome> {
    train_with_progress(config, train, dev, |_| {})
}

/// Mini-batch training with Adam. Each sentence contributes its mean token
/// loss divided by the batch size; one optimizer step follows each batch.
/// The parameters with the best dev F1 are kept (earliest epoch on ties).
pub fn train_with_progress(
    config: &TrainConfig,
    train: &[SentenceExample],
    dev: &[SentenceExample],
    mut progress: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    if dev.is_empty() {
        return Err(Error::Config("dev set is empty".into()));
    }
    let vocabs = build_vocabs(train, config.min_count)?;
    let encoded = encode_all(train, &vocabs, config.max_len)?;
    encode_all(dev, &vocabs, config.max_len)?;

    let mut model_config = ModelConfig::new(config.kind, config.gtn, &vocabs, config.seed)
        .with_dims(config.dims);
    model_config.max_len = config.max_len;
    let mut model = EventModel::new(model_config)?;
    let adam = AdamConfig { lr: config.lr, ..AdamConfig::default() };
    let mut state = AdamState::new(adam, model.params());
    let mut grads = GradStore::zeros_like(model.params());

    let mut log: Vec<EpochLog> = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, EventModel)> = None;
    for epoch in 1..=config.epochs {
        let shuffle = config.seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut total = 0.0;
        for (b, batch) in batch_iter(&encoded, config.batch_size, Some(shuffle))?.enumerate() {
            grads.zero();
            let scale = 1.0 / batch.len() as f64;
            for sentence in &batch {
                let loss = match model.accumulate_gradients(sentence, scale, &mut grads) {
                    Ok(l) => l,
                    Err(e) if e.is_numeric() => return Err(Error::NanLoss { epoch, batch: b }),
                    Err(e) => return Err(e),
                };
                if !loss.is_finite() {
                    return Err(Error::NanLoss { epoch, batch: b });
                }
                total += loss;
            }
            match adam_step(model.params_mut(), &grads, &mut state) {
                Err(e) if e.is_numeric() => return Err(Error::NanLoss { epoch, batch: b }),
                other => other?,
            }
        }
        let report = evaluate_model(&model, &vocabs, dev)?;
        let entry = EpochLog { epoch, mean_loss: total / encoded.len() as f64, dev: report };
        progress(&entry);
        let f1 = entry.dev.f1;
        log.push(entry);
        if best.as_ref().is_none_or(|(_, f, _)| f1 > *f) {
            best = Some((epoch, f1, model.clone()));
        }
        let (best_epoch, best_f1, _) = best.as_ref().expect("set above");
        if config.target_f1.is_some_and(|t| *best_f1 >= t)
            || config.patience.is_some_and(|p| epoch - best_epoch >= p)
        {
            break;
        }
    }
    let (best_epoch, _, model) = best.expect("at least one epoch");
    Ok(TrainOutcome { model, vocabs, log, best_epoch })
}
