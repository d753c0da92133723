//! Trains the multi-order graph attention tagger (hop orders 1..T) with and
//! without learned meta-paths.
//!
//!     cargo run --release --example train_multi_order -- [EPOCHS] [T]

use dgt::corpus::{generate_synthetic, SyntheticConfig};
use dgt::eval::{train_with_progress, TrainConfig};
use dgt::models::ModelKind;

fn main() -> dgt::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().map_or(Ok(10), |s| s.parse()).expect("EPOCHS must be an integer");
    let hops = args.next().map_or(Ok(3), |s| s.parse()).expect("T must be an integer");
    let corpus = generate_synthetic(&SyntheticConfig::default())?;

    let mut best = Vec::new();
    for gtn in [true, false] {
        let mut config = TrainConfig::new(ModelKind::Moganed { hops }, gtn);
        config.epochs = epochs;
        let outcome =
            train_with_progress(&config, &corpus.train.examples, &corpus.dev.examples, |log| {
                println!("gtn={gtn:<5} epoch {:>2}  loss {:.4}  dev F1 {:.4}", log.epoch, log.mean_loss, log.dev.f1);
            })?;
        best.push((gtn, outcome.best().dev.f1));
    }
    for (gtn, f1) in best {
        println!("gtn={gtn:<5} best dev F1 {f1:.4}");
    }
    Ok(())
}
