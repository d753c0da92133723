//! Checks adjacency products against explicit walk enumeration on random
//! labeled graphs.
//!
//!     cargo run --example metapath_oracle

use dgt::graphs::{
    adjacency_from_edges, collapse_homogeneous, matrix_power, path_count_oracle,
    random_labeled_edges, Direction,
};

fn main() -> dgt::Result<()> {
    let (n, labels) = (6, 3);
    let edges = random_labeled_edges(5, n, labels, 0.3);
    let set = adjacency_from_edges(n, &edges, labels)?;
    println!("{} labeled edges over {n} nodes", edges.len());

    // A_{l1} A_{l2} counts walks whose edges carry l1 then l2.
    let mut checked = 0;
    for l1 in 0..labels {
        for l2 in 0..labels {
            let product = set.fwd()[l1].matmul(&set.fwd()[l2])?;
            for u in 0..n {
                for v in 0..n {
                    let walks = path_count_oracle(&set, Direction::Forward, &[l1, l2], u, v);
                    assert_eq!(product.get(u, v), walks as f64);
                    checked += 1;
                }
            }
        }
    }
    println!("{checked} labeled two-step entries match the oracle");

    let a = collapse_homogeneous(&set).fwd;
    for t in 1..=3 {
        let power = matrix_power(&a, t)?;
        let total: f64 = power.data().iter().sum();
        println!("A^{t}: {total} directed walks of length {t}");
    }
    Ok(())
}
