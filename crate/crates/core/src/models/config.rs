use serde::{Deserialize, Serialize};

use crate::corpus::{Vocabs, DEFAULT_MAX_LEN};
use crate::error::{Error, Result};

/// Which graph module sits between the encoder and the classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelKind {
    /// `layers` stacked gated graph convolutions.
    Gcn { layers: usize },
    /// Parallel branches over hop orders `1..=hops`.
    Moganed { hops: usize },
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gcn { .. } => "gcn",
            ModelKind::Moganed { .. } => "moganed",
        }
    }
}

/// Layer widths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub word: usize,
    /// Width of each of the POS, NER and position embeddings.
    pub feature: usize,
    /// Hidden units per LSTM direction.
    pub lstm_hidden: usize,
    pub graph: usize,
    /// Projection width inside the multi-order attention gate.
    pub attention: usize,
    /// Width of the hop-order aggregation scorer.
    pub aggregation: usize,
    pub mlp_hidden: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            word: 100,
            feature: 50,
            lstm_hidden: 100,
            graph: 150,
            attention: 150,
            aggregation: 100,
            mlp_hidden: 100,
        }
    }
}

impl ModelDims {
    /// Very small widths, used where every scalar gets a finite-difference
    /// probe.
    pub fn tiny() -> Self {
        ModelDims {
            word: 4,
            feature: 3,
            lstm_hidden: 3,
            graph: 4,
            attention: 3,
            aggregation: 3,
            mlp_hidden: 4,
        }
    }

    pub fn input(&self) -> usize {
        self.word + 3 * self.feature
    }

    pub fn context(&self) -> usize {
        2 * self.lstm_hidden
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub gtn: bool,
    pub dims: ModelDims,
    pub word_vocab: usize,
    pub pos_vocab: usize,
    pub ner_vocab: usize,
    pub num_labels: usize,
    /// Event types plus NONE.
    pub num_classes: usize,
    pub max_len: usize,
    pub leaky_slope: f64,
    pub init_seed: u64,
}

impl ModelConfig {
    pub fn new(kind: ModelKind, gtn: bool, vocabs: &Vocabs, init_seed: u64) -> Self {
        ModelConfig {
            kind,
            gtn,
            dims: ModelDims::default(),
            word_vocab: vocabs.word.len(),
            pos_vocab: vocabs.pos.len(),
            ner_vocab: vocabs.ner.len(),
            num_labels: vocabs.num_labels(),
            num_classes: vocabs.num_classes(),
            max_len: DEFAULT_MAX_LEN,
            leaky_slope: 0.2,
            init_seed,
        }
    }

    pub fn with_dims(mut self, dims: ModelDims) -> Self {
        self.dims = dims;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ModelKind::Gcn { layers } if !(1..=3).contains(&layers) => {
                return Err(Error::Config(format!("gcn layer count must be 1..=3, got {layers}")))
            }
            ModelKind::Moganed { hops: 0 } => {
                return Err(Error::Config("moganed needs at least one hop order".into()))
            }
            _ => {}
        }
        let d = &self.dims;
        let widths = [
            ("word", d.word),
            ("feature", d.feature),
            ("lstm_hidden", d.lstm_hidden),
            ("graph", d.graph),
            ("attention", d.attention),
            ("aggregation", d.aggregation),
            ("mlp_hidden", d.mlp_hidden),
            ("word_vocab", self.word_vocab),
            ("pos_vocab", self.pos_vocab),
            ("ner_vocab", self.ner_vocab),
            ("num_classes", self.num_classes),
            ("max_len", self.max_len),
        ];
        if let Some((name, _)) = widths.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.gtn && self.num_labels == 0 {
            return Err(Error::Config("edge-type selection needs at least one label".into()));
        }
        if !self.leaky_slope.is_finite() {
            return Err(Error::Config("leaky_slope must be finite".into()));
        }
        Ok(())
    }
}
