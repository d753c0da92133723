//! Dense adjacency matrices built from dependency edges.
//!
//! For a sentence of `n` tokens and `L` edge types, `fwd[l](h, d) = 1`
//! exactly when the sentence has an edge from head `h` to dependent `d` with
//! label `l`; `rev[l]` is its transpose and the loop matrix is the identity.
//! Entries are binary: a duplicated edge is still 1.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::EncodedSentence;
use crate::error::{Error, Result};
use crate::numcore::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Direction {
    Forward,
    Reverse,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledAdjacencySet {
    n: usize,
    fwd: Vec<Tensor>,
    rev: Vec<Tensor>,
    identity: Tensor,
}

impl LabeledAdjacencySet {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_labels(&self) -> usize {
        self.fwd.len()
    }

    pub fn fwd(&self) -> &[Tensor] {
        &self.fwd
    }

    pub fn rev(&self) -> &[Tensor] {
        &self.rev
    }

    pub fn stack(&self, direction: Direction) -> &[Tensor] {
        match direction {
            Direction::Forward => &self.fwd,
            Direction::Reverse => &self.rev,
        }
    }

    pub fn identity(&self) -> &Tensor {
        &self.identity
    }
}

/// Label-blind view: `A_fwd`, its transpose and the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneousTriple {
    pub fwd: Tensor,
    pub rev: Tensor,
    pub identity: Tensor,
}

impl HomogeneousTriple {
    pub fn get(&self, direction: Direction) -> &Tensor {
        match direction {
            Direction::Forward => &self.fwd,
            Direction::Reverse => &self.rev,
        }
    }
}

/// Builds per-label stacks from `(head, dependent, label)` triples.
pub fn adjacency_from_edges(
    n: usize,
    edges: &[(usize, usize, usize)],
    num_labels: usize,
) -> Result<LabeledAdjacencySet> {
    let mut fwd = vec![Tensor::zeros(&[n, n]); num_labels];
    for &(h, d, l) in edges {
        if h >= n || d >= n || l >= num_labels {
            return Err(Error::Config(format!(
                "edge ({h}, {d}, {l}) outside {n} tokens / {num_labels} labels"
            )));
        }
        if h == d {
            return Err(Error::Config(format!("self-loop edge on token {h}")));
        }
        fwd[l].set(h, d, 1.0);
    }
    let rev = fwd.iter().map(Tensor::transpose).collect();
    Ok(LabeledAdjacencySet { n, fwd, rev, identity: Tensor::identity(n) })
}

pub fn build_labeled_adjacency(
    sentence: &EncodedSentence,
    num_labels: usize,
) -> Result<LabeledAdjacencySet> {
    adjacency_from_edges(sentence.len(), &sentence.edges, num_labels)
}

/// Elementwise maximum over labels, i.e. "is there any edge".
pub fn collapse_homogeneous(set: &LabeledAdjacencySet) -> HomogeneousTriple {
    let n = set.n;
    let mut fwd = Tensor::zeros(&[n, n]);
    for layer in &set.fwd {
        for (o, x) in fwd.data_mut().iter_mut().zip(layer.data()) {
            *o = o.max(*x);
        }
    }
    let rev = fwd.transpose();
    HomogeneousTriple { fwd, rev, identity: Tensor::identity(n) }
}

/// `a` multiplied by itself `t` times.
pub fn matrix_power(a: &Tensor, t: usize) -> Result<Tensor> {
    let (r, c) = a.dims2();
    if r != c {
        return Err(Error::Shape { op: "matrix_power", shapes: vec![a.shape().to_vec()] });
    }
    if t == 0 {
        return Err(Error::Config("matrix power order must be at least 1".into()));
    }
    let mut out = a.clone();
    for _ in 1..t {
        out = out.matmul(a)?;
    }
    Ok(out)
}

/// Counts directed walks `u -> ... -> v` whose i-th edge carries
/// `labels[i]`, by enumerating every sequence of intermediate nodes.
///
/// Exponential in `labels.len()`; intended for small test graphs.
pub fn path_count_oracle(
    set: &LabeledAdjacencySet,
    direction: Direction,
    labels: &[usize],
    u: usize,
    v: usize,
) -> u64 {
    fn walk(stack: &[Tensor], labels: &[usize], at: usize, target: usize, n: usize) -> u64 {
        match labels.split_first() {
            None => u64::from(at == target),
            Some((&l, rest)) => (0..n)
                .filter(|&next| stack[l].get(at, next) == 1.0)
                .map(|next| walk(stack, rest, next, target, n))
                .sum(),
        }
    }
    if labels.is_empty() {
        return 0;
    }
    walk(set.stack(direction), labels, u, v, set.n)
}

/// Seeded random labeled graph without self-loops. Each ordered pair gets an
/// edge with probability `density`, with a uniformly drawn label.
pub fn random_labeled_edges(
    seed: u64,
    n: usize,
    num_labels: usize,
    density: f64,
) -> Vec<(usize, usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for h in 0..n {
        for d in 0..n {
            if h != d && num_labels > 0 && rng.gen_bool(density) {
                edges.push((h, d, rng.gen_range(0..num_labels)));
            }
        }
    }
    edges
}
