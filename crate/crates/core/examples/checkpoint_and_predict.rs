//! Trains a small model, saves and reloads its checkpoint, scores the test
//! split and annotates a few unlabeled sentences.
//!
//!     cargo run --release --example checkpoint_and_predict

use dgt::corpus::{generate_synthetic, write_jsonl, SyntheticConfig};
use dgt::eval::{evaluate_model, load_checkpoint, predict_file, save_checkpoint, train, TrainConfig};
use dgt::models::ModelKind;

fn main() -> dgt::Result<()> {
    let corpus = generate_synthetic(&SyntheticConfig {
        n_train: 400,
        n_dev: 60,
        n_test: 60,
        ..SyntheticConfig::default()
    })?;
    let mut config = TrainConfig::new(ModelKind::Gcn { layers: 1 }, true);
    config.epochs = 5;
    config.lr = 1e-3;
    let outcome = train(&config, &corpus.train.examples, &corpus.dev.examples)?;

    let tmp = tempfile::tempdir().map_err(|e| dgt::Error::io(std::env::temp_dir(), e))?;
    let dir = tmp.path();
    let ckpt = dir.join("model.json");
    save_checkpoint(&outcome.model, &outcome.vocabs, &ckpt)?;
    let loaded = load_checkpoint(&ckpt)?;
    println!("checkpoint: {} ({} scalars)", ckpt.display(), loaded.model.params().scalar_count());

    let report = evaluate_model(&loaded.model, &loaded.vocabs, &corpus.test.examples)?;
    print!("{}", report.table());

    let unlabeled: Vec<_> = corpus.test.examples[..3]
        .iter()
        .map(|e| dgt::corpus::SentenceExample { triggers: Vec::new(), ..e.clone() })
        .collect();
    let input = dir.join("in.jsonl");
    let output = dir.join("out.jsonl");
    write_jsonl(&input, &unlabeled)?;
    predict_file(&loaded, &input, &output)?;
    let annotated = std::fs::read_to_string(&output).map_err(|e| dgt::Error::io(&output, e))?;
    for line in annotated.lines() {
        println!("{line}");
    }
    Ok(())
}
