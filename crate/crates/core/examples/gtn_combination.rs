//! Soft edge-type selection: learns which dependency label a target
//! adjacency matrix is built from, by gradient descent on the mixing
//! weights alone.
//!
//!     cargo run --example gtn_combination

use dgt::graphs::{adjacency_from_edges, Direction};
use dgt::gtn::{combine, metapath_product, GtnCombination, MetaPathChain};
use dgt::numcore::{adam_step, AdamConfig, AdamState, GradStore, Graph, ParamStore};

fn main() -> dgt::Result<()> {
    let edges = [(0, 1, 0), (1, 2, 1), (2, 3, 2), (0, 3, 1)];
    let set = adjacency_from_edges(4, &edges, 3)?;
    let target = set.fwd()[1].clone();

    let mut store = ParamStore::new();
    let comb = GtnCombination::register(&mut store, "w", 3)?;
    let mut state = AdamState::new(AdamConfig { lr: 0.05, ..AdamConfig::default() }, &store);
    for step in 0..=200 {
        let mut grads = GradStore::zeros_like(&store);
        let loss_value = {
            let mut g = Graph::new();
            let q = combine(&mut g, &store, &comb, set.fwd())?;
            let t = g.input(target.clone());
            let neg = g.scale(t, -1.0)?;
            let diff = g.add(q, neg)?;
            let sq = g.mul(diff, diff)?;
            let loss = g.sum(sq)?;
            g.backward(loss, &mut grads)?;
            g.value(loss).data()[0]
        };
        if step % 50 == 0 {
            let alpha = comb.alpha(&store);
            println!("step {step:>3}  loss {loss_value:.5}  alpha {alpha:.3?}");
        }
        adam_step(&mut store, &grads, &mut state)?;
    }

    let chain = MetaPathChain::register(&mut store, "chain", Direction::Forward, 3, 2)?;
    let mut g = Graph::new();
    let q2 = metapath_product(&mut g, &store, &chain, &set)?;
    println!("uniform two-step meta-path matrix:\n{:?}", g.value(q2));
    Ok(())
}
