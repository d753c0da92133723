//! Counts trainable scalars with and without edge-type selection and
//! compares the difference against the closed-form count.
//!
//!     cargo run --example parameter_audit

use dgt::gtn::gtn_param_count;
use dgt::models::{EventModel, ModelConfig, ModelDims, ModelKind};

fn config(kind: ModelKind, gtn: bool, labels: usize) -> ModelConfig {
    ModelConfig {
        kind,
        gtn,
        dims: ModelDims::default(),
        word_vocab: 1000,
        pos_vocab: 18,
        ner_vocab: 8,
        num_labels: labels,
        num_classes: 34,
        max_len: 50,
        leaky_slope: 0.2,
        init_seed: 0,
    }
}

fn main() -> dgt::Result<()> {
    let labels = 35;
    for kind in [
        ModelKind::Gcn { layers: 1 },
        ModelKind::Gcn { layers: 3 },
        ModelKind::Moganed { hops: 1 },
        ModelKind::Moganed { hops: 3 },
    ] {
        let base = EventModel::new(config(kind, false, labels))?.params().scalar_count();
        let with = EventModel::new(config(kind, true, labels))?.params().scalar_count();
        println!(
            "{:<22} baseline {:>9}  with edge types {:>9}  delta {:>4}  expected {:>4}",
            format!("{kind:?}"),
            base,
            with,
            with - base,
            gtn_param_count(kind, labels)
        );
    }
    Ok(())
}
