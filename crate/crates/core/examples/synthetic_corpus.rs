//! Generates the synthetic corpus, shows one ambiguous pair and writes the
//! three splits as JSON Lines.
//!
//!     cargo run --example synthetic_corpus -- [OUT_DIR]

use dgt::corpus::{generate_synthetic, SyntheticConfig};

fn main() -> dgt::Result<()> {
    let corpus = generate_synthetic(&SyntheticConfig::default())?;
    for (name, split) in [("train", &corpus.train), ("dev", &corpus.dev), ("test", &corpus.test)] {
        let triggers: usize = split.examples.iter().map(|e| e.triggers.len()).sum();
        println!(
            "{name:>5}: {:>4} sentences, {:>4} ambiguous pairs, {:>4} triggers",
            split.examples.len(),
            split.pairs.len(),
            triggers
        );
    }

    let (a, b) = corpus.dev.pairs[0];
    for idx in [a, b] {
        let ex = &corpus.dev.examples[idx];
        println!("\n{}", ex.tokens.join(" "));
        for e in &ex.edges {
            println!("  {} -{}-> {}", ex.tokens[e.head], e.label, ex.tokens[e.dependent]);
        }
        for t in &ex.triggers {
            println!("  trigger: {} = {}", ex.tokens[t.index], t.event_type);
        }
    }

    if let Some(dir) = std::env::args().nth(1) {
        corpus.write(&dir)?;
        println!("\nwrote {dir}/{{train,dev,test}}.jsonl");
    }
    Ok(())
}
