//! Reverse-mode differentiation on a small graph: a two-layer network with
//! a softmax cross-entropy loss, its gradients, and replay with new inputs.
//!
//!     cargo run --example autodiff

use dgt::numcore::{GradStore, Graph, ParamStore, Tensor};

fn main() -> dgt::Result<()> {
    let mut store = ParamStore::new();
    let w1 = store.add("w1", Tensor::matrix(3, 4, (0..12).map(|i| (i as f64 * 0.37).sin()).collect())?)?;
    let w2 = store.add("w2", Tensor::matrix(4, 2, (0..8).map(|i| (i as f64 * 0.91).cos()).collect())?)?;

    let mut g = Graph::new();
    let x = g.input(Tensor::matrix(2, 3, vec![0.5, -1.0, 0.25, 1.5, 0.0, -0.5])?);
    let p1 = g.param(&store, w1);
    let p2 = g.param(&store, w2);
    let h = g.matmul(x, p1)?;
    let h = g.tanh(h)?;
    let logits = g.matmul(h, p2)?;
    let loss = g.cross_entropy(logits, &[1, 0])?;
    println!("loss = {:.6}", g.value(loss).data()[0]);

    let mut grads = GradStore::zeros_like(&store);
    g.backward(loss, &mut grads)?;
    for (id, name, t) in store.iter() {
        println!("d loss / d {name} {:?}: {:.4?}", t.shape(), grads.get(id));
    }

    // The same graph can be replayed with a different input.
    g.evaluate(vec![(x, Tensor::matrix(2, 3, vec![0.0; 6])?)])?;
    println!("loss at zero input = {:.6}", g.value(loss).data()[0]);
    Ok(())
}
