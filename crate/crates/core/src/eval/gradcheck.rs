//! Finite-difference verification of a whole model on a fixed sentence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::EncodedSentence;
use crate::error::Result;
use crate::models::{EventModel, ModelConfig, ModelDims, ModelKind};
use crate::numcore::{finite_diff_check, GradCheckReport, GradStore};

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    pub tolerance: f64,
    pub seed: u64,
    /// Adds a deliberate error to one analytic gradient entry, so callers can
    /// confirm the check is able to fail.
    pub corrupt: bool,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions { epsilon: 1e-5, tolerance: 1e-4, seed: 6, corrupt: false }
    }
}

pub const FIXTURE_LABELS: usize = 3;
pub const FIXTURE_CLASSES: usize = 4;

/// Six tokens, a small labeled tree and two gold triggers.
pub fn gradcheck_sentence() -> EncodedSentence {
    EncodedSentence {
        words: vec![1, 2, 3, 4, 2, 5],
        pos: vec![1, 2, 1, 3, 0, 2],
        ner: vec![0, 1, 0, 2, 0, 1],
        positions: (0..6).collect(),
        edges: vec![(1, 0, 0), (1, 3, 1), (3, 2, 2), (1, 5, 0), (5, 4, 1)],
        gold: vec![0, 2, 0, 1, 0, 3],
    }
}

pub fn gradcheck_config(kind: ModelKind, gtn: bool, seed: u64) -> ModelConfig {
    ModelConfig {
        kind,
        gtn,
        dims: ModelDims::tiny(),
        word_vocab: 6,
        pos_vocab: 4,
        ner_vocab: 3,
        num_labels: FIXTURE_LABELS,
        num_classes: FIXTURE_CLASSES,
        max_len: 8,
        leaky_slope: 0.2,
        init_seed: seed,
    }
}

/// Builds the tiny model, moves the zero-initialised parameters to generic
/// values and compares every gradient entry against central differences.
pub fn model_gradcheck(
    kind: ModelKind,
    gtn: bool,
    options: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let mut model = EventModel::new(gradcheck_config(kind, gtn, options.seed))?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_add(1));
    let ids: Vec<_> = model.params().ids().collect();
    for id in ids {
        let name = model.params().name(id).to_string();
        if name.ends_with("bias") || name.ends_with("eps_att") || name.starts_with("gtn.") {
            for x in model.params_mut().get_mut(id).data_mut() {
                *x = rng.gen_range(-0.5..0.5);
            }
        }
    }
    let sentence = gradcheck_sentence();
    let mut grads = GradStore::zeros_like(model.params());
    model.accumulate_gradients(&sentence, 1.0, &mut grads)?;
    if options.corrupt {
        let id = model.params().ids().next().expect("model has parameters");
        let slot = &mut grads.get_mut(id)[0];
        *slot += 1e-2 * slot.abs().max(1.0);
    }
    let mut store = model.params().clone();
    let mut probe = model.clone();
    finite_diff_check(
        &mut store,
        &grads,
        |s| {
            *probe.params_mut() = s.clone();
            probe.loss(&sentence)
        },
        options.epsilon,
        options.tolerance,
    )
}
