//! Trains the stacked gated-convolution tagger on the synthetic corpus, with
//! and without learned edge-type selection, and prints dev F1 per epoch.
//!
//!     cargo run --release --example train_stacked -- [EPOCHS] [LAYERS]

use std::time::Instant;

use dgt::corpus::{generate_synthetic, SyntheticConfig};
use dgt::eval::{train_with_progress, TrainConfig};
use dgt::models::ModelKind;

fn main() -> dgt::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().map_or(Ok(8), |s| s.parse()).expect("EPOCHS must be an integer");
    let layers = args.next().map_or(Ok(1), |s| s.parse()).expect("LAYERS must be an integer");
    let corpus = generate_synthetic(&SyntheticConfig::default())?;

    for gtn in [true, false] {
        let mut config = TrainConfig::new(ModelKind::Gcn { layers }, gtn);
        config.epochs = epochs;
        let start = Instant::now();
        let outcome =
            train_with_progress(&config, &corpus.train.examples, &corpus.dev.examples, |log| {
                println!(
                    "gtn={gtn:<5} epoch {:>2}  loss {:.4}  dev F1 {:.4}  ({:.0?})",
                    log.epoch,
                    log.mean_loss,
                    log.dev.f1,
                    start.elapsed()
                );
            })?;
        println!("gtn={gtn:<5} best dev F1 {:.4} at epoch {}", outcome.best().dev.f1, outcome.best_epoch);
        if gtn {
            let labels = outcome.vocabs.deplabel.entries();
            for comb in outcome.model.gtn_combinations() {
                let alpha = comb.alpha(outcome.model.params());
                let top: Vec<String> = labels
                    .iter()
                    .zip(&alpha)
                    .map(|(l, a)| format!("{l}:{a:.2}"))
                    .collect();
                println!("  edge-type weights {}", top.join(" "));
            }
        }
    }
    Ok(())
}
