//! Soft edge-type selection: a learnable weight vector `w` over the `L`
//! dependency labels yields `α = softmax(w)` and the heterogeneous adjacency
//! `Q = Σ_l α_l A_l`. A meta-path of length `t` multiplies `t` such
//! matrices, each with its own weights.

use crate::error::{Error, Result};
use crate::graphs::{Direction, LabeledAdjacencySet};
use crate::models::ModelKind;
use crate::numcore::{softmax_into, Graph, NodeId, ParamId, ParamStore, Tensor};

/// One learnable convex combination over `num_labels` adjacency matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct GtnCombination {
    pub weights: ParamId,
    pub num_labels: usize,
}

impl GtnCombination {
    /// Registers a `1 x L` weight row initialised to zero (uniform α).
    pub fn register(store: &mut ParamStore, name: &str, num_labels: usize) -> Result<Self> {
        let weights = store.add(name, Tensor::zeros(&[1, num_labels]))?;
        Ok(GtnCombination { weights, num_labels })
    }

    /// Current `softmax(w)`.
    pub fn alpha(&self, store: &ParamStore) -> Vec<f64> {
        softmax_weights(store.get(self.weights).data())
    }
}

pub fn softmax_weights(w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; w.len()];
    if !w.is_empty() {
        softmax_into(w, &mut out);
    }
    out
}

/// Ordered product of `factors.len()` combinations over one direction.
#[derive(Clone, Debug, PartialEq)]
pub struct MetaPathChain {
    pub direction: Direction,
    pub factors: Vec<GtnCombination>,
}

impl MetaPathChain {
    /// Registers `length` independent combinations named `{prefix}.{i}`.
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        direction: Direction,
        num_labels: usize,
        length: usize,
    ) -> Result<Self> {
        let factors = (0..length)
            .map(|i| GtnCombination::register(store, &format!("{prefix}.{i}"), num_labels))
            .collect::<Result<_>>()?;
        Ok(MetaPathChain { direction, factors })
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// Trainable scalars held by the chain.
    pub fn scalar_count(&self) -> usize {
        self.factors.iter().map(|f| f.num_labels).sum()
    }
}

/// Flattens a stack of `L` square matrices into an `L x n²` constant.
fn stack_node<'a>(g: &mut Graph<'a>, stack: &[Tensor]) -> Result<(NodeId, usize)> {
    let n = stack.first().map_or(0, Tensor::rows);
    let mut data = Vec::with_capacity(stack.len() * n * n);
    for m in stack {
        if m.dims2() != (n, n) {
            return Err(Error::Shape {
                op: "gtn_stack",
                shapes: stack.iter().map(|m| m.shape().to_vec()).collect(),
            });
        }
        data.extend_from_slice(m.data());
    }
    Ok((g.input(Tensor::matrix(stack.len(), n * n, data)?), n))
}

fn combine_flat<'a>(
    g: &mut Graph<'a>,
    store: &'a ParamStore,
    comb: &GtnCombination,
    stack: NodeId,
    n: usize,
) -> Result<NodeId> {
    let w = g.param(store, comb.weights);
    let alpha = g.softmax_rows(w)?;
    let flat = g.matmul(alpha, stack)?;
    g.reshape(flat, n, n)
}

/// `Q = Σ_l softmax(w)_l · stack[l]`, differentiable in `w`.
pub fn combine<'a>(
    g: &mut Graph<'a>,
    store: &'a ParamStore,
    comb: &GtnCombination,
    stack: &[Tensor],
) -> Result<NodeId> {
    if stack.len() != comb.num_labels {
        return Err(Error::Shape {
            op: "combine",
            shapes: vec![vec![comb.num_labels], vec![stack.len()]],
        });
    }
    if stack.is_empty() {
        return Err(Error::Config("cannot combine an empty label stack".into()));
    }
    let (flat, n) = stack_node(g, stack)?;
    combine_flat(g, store, comb, flat, n)
}

/// `Q_0 · Q_1 · … · Q_{t-1}` over the chain's direction of `set`.
pub fn metapath_product<'a>(
    g: &mut Graph<'a>,
    store: &'a ParamStore,
    chain: &MetaPathChain,
    set: &LabeledAdjacencySet,
) -> Result<NodeId> {
    if chain.is_empty() {
        return Err(Error::Config("meta-path chain must have at least one factor".into()));
    }
    let stack = set.stack(chain.direction);
    if chain.factors.iter().any(|f| f.num_labels != stack.len()) || stack.is_empty() {
        return Err(Error::Shape {
            op: "metapath_product",
            shapes: vec![vec![chain.factors[0].num_labels], vec![stack.len()]],
        });
    }
    let (flat, n) = stack_node(g, stack)?;
    let mut acc = combine_flat(g, store, &chain.factors[0], flat, n)?;
    for f in &chain.factors[1..] {
        let q = combine_flat(g, store, f, flat, n)?;
        acc = g.matmul(acc, q)?;
    }
    Ok(acc)
}

/// Extra trainable scalars a GTN-augmented model carries over its
/// label-blind baseline: `2L` for the stacked model (one combination per
/// direction shared by all layers) and `Σ_{t=1..T} 2Lt = L·T·(T+1)` for the
/// multi-order model.
pub fn gtn_param_count(kind: ModelKind, num_labels: usize) -> usize {
    match kind {
        ModelKind::Gcn { .. } => 2 * num_labels,
        ModelKind::Moganed { hops } => num_labels * hops * (hops + 1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::adjacency_from_edges;

    fn two_label_stacks() -> Vec<Tensor> {
        vec![
            Tensor::matrix(2, 2, vec![0.0, 1.0, 0.0, 0.0]).unwrap(),
            Tensor::matrix(2, 2, vec![0.0, 0.0, 1.0, 0.0]).unwrap(),
        ]
    }

    #[test]
    fn singleton_label_returns_the_matrix() {
        let mut store = ParamStore::new();
        let comb = GtnCombination::register(&mut store, "w", 1).unwrap();
        store.get_mut(comb.weights).data_mut()[0] = 3.7;
        let stack = vec![Tensor::matrix(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap()];
        let mut g = Graph::new();
        let q = combine(&mut g, &store, &comb, &stack).unwrap();
        assert_eq!(g.value(q), &stack[0]);
    }

    #[test]
    fn uniform_weights_average() {
        let mut store = ParamStore::new();
        let comb = GtnCombination::register(&mut store, "w", 2).unwrap();
        let mut g = Graph::new();
        let q = combine(&mut g, &store, &comb, &two_label_stacks()).unwrap();
        assert_eq!(g.value(q).data(), &[0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn log_three_weights() {
        let mut store = ParamStore::new();
        let comb = GtnCombination::register(&mut store, "w", 2).unwrap();
        store.get_mut(comb.weights).data_mut()[0] = 3f64.ln();
        let mut g = Graph::new();
        let q = combine(&mut g, &store, &comb, &two_label_stacks()).unwrap();
        let v = g.value(q).data();
        assert!((v[1] - 0.75).abs() < 1e-15);
        assert!((v[2] - 0.25).abs() < 1e-15);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[3], 0.0);
    }

    #[test]
    fn stack_length_must_match() {
        let mut store = ParamStore::new();
        let comb = GtnCombination::register(&mut store, "w", 3).unwrap();
        let mut g = Graph::new();
        assert!(combine(&mut g, &store, &comb, &two_label_stacks()).is_err());
    }

    #[test]
    fn length_one_chain_equals_combine() {
        let set = adjacency_from_edges(3, &[(0, 1, 0), (1, 2, 1)], 2).unwrap();
        let mut store = ParamStore::new();
        let chain = MetaPathChain::register(&mut store, "c", Direction::Forward, 2, 1).unwrap();
        store.get_mut(chain.factors[0].weights).data_mut()[1] = 0.4;
        let mut g = Graph::new();
        let p = metapath_product(&mut g, &store, &chain, &set).unwrap();
        let q = combine(&mut g, &store, &chain.factors[0], set.fwd()).unwrap();
        assert_eq!(g.value(p), g.value(q));
    }

    #[test]
    fn two_step_chain_support() {
        let set = adjacency_from_edges(3, &[(0, 1, 0), (1, 2, 0)], 1).unwrap();
        let mut store = ParamStore::new();
        let chain = MetaPathChain::register(&mut store, "c", Direction::Forward, 1, 2).unwrap();
        let mut g = Graph::new();
        let p = metapath_product(&mut g, &store, &chain, &set).unwrap();
        let v = g.value(p);
        for u in 0..3 {
            for w in 0..3 {
                assert_eq!(v.get(u, w) > 0.0, (u, w) == (0, 2));
            }
        }
        assert_eq!(chain.scalar_count(), 2);
    }

    #[test]
    fn parameter_count_formulas() {
        assert_eq!(gtn_param_count(ModelKind::Gcn { layers: 1 }, 35), 70);
        assert_eq!(gtn_param_count(ModelKind::Gcn { layers: 3 }, 35), 70);
        assert_eq!(gtn_param_count(ModelKind::Moganed { hops: 3 }, 35), 420);
        assert_eq!(gtn_param_count(ModelKind::Moganed { hops: 3 }, 0), 0);
        let by_sum: usize = (1..=4).map(|t| 2 * 7 * t).sum();
        assert_eq!(gtn_param_count(ModelKind::Moganed { hops: 4 }, 7), by_sum);
    }
}
