//! Multi-order graph attention: parallel branches over hop orders
//! `1..=T`, each gated by a masked softmax attention, merged by a per-token
//! attention over the branches.

use crate::error::{Error, Result};
use crate::models::conv::RoleAdjacency;
use crate::models::init::Initializer;
use crate::numcore::{Graph, NodeId, ParamId, ParamStore, Tensor};

/// Fill value for masked logits; `exp` of it underflows to exactly zero.
const MASKED: f64 = -1e30;

/// Per role and hop order. `w_c` is a `2d' x 1` column whose top half scores
/// the receiving token and bottom half the sending token.
#[derive(Clone, Debug, PartialEq)]
pub struct MoganedAttnParams {
    pub weight: ParamId,
    pub bias: ParamId,
    pub w_att: ParamId,
    pub w_c: ParamId,
    pub width: usize,
}

impl MoganedAttnParams {
    pub(crate) fn register(
        store: &mut ParamStore,
        init: &mut Initializer,
        prefix: &str,
        d_in: usize,
        d_out: usize,
        width: usize,
    ) -> Result<Self> {
        Ok(MoganedAttnParams {
            weight: store.add(format!("{prefix}.weight"), init.xavier(d_in, d_out))?,
            bias: store.add(format!("{prefix}.bias"), Tensor::zeros(&[1, d_out]))?,
            w_att: store.add(format!("{prefix}.w_att"), init.xavier(d_in, width))?,
            w_c: store.add(format!("{prefix}.w_c"), init.xavier(2 * width, 1))?,
            width,
        })
    }
}

/// Scores each branch output with `cᵀ tanh(W_s v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregationParams {
    pub w_s: ParamId,
    pub context: ParamId,
}

impl AggregationParams {
    pub(crate) fn register(
        store: &mut ParamStore,
        init: &mut Initializer,
        d: usize,
        width: usize,
    ) -> Result<Self> {
        Ok(AggregationParams {
            w_s: store.add("moganed.agg.w_s", init.xavier(d, width))?,
            context: store.add("moganed.agg.context", init.xavier(width, 1))?,
        })
    }
}

/// Gate matrix `G` with `G(u,·) = softmax_{v: A(u,v) ≠ 0} E(u,v)` where
/// `E(u,v) = A(u,v) · LeakyReLU(c₁·W_att h_u + c₂·W_att h_v)`. Rows of `A`
/// with no nonzero entry give all-zero rows.
pub fn moganed_attention<'a>(
    g: &mut Graph<'a>,
    store: &'a ParamStore,
    params: &MoganedAttnParams,
    h: NodeId,
    a: NodeId,
    slope: f64,
) -> Result<NodeId> {
    let (n, m) = g.value(a).dims2();
    if n != m || g.value(h).rows() != n {
        return Err(Error::Shape {
            op: "moganed_attention",
            shapes: vec![g.shape(h).to_vec(), g.shape(a).to_vec()],
        });
    }
    let mask: Vec<bool> = g.value(a).data().iter().map(|x| *x == 0.0).collect();
    let live_rows: Vec<f64> = mask
        .chunks(n)
        .map(|row| if row.iter().all(|m| *m) { 0.0 } else { 1.0 })
        .collect();

    let w_att = g.param(store, params.w_att);
    let w_c = g.param(store, params.w_c);
    let z = g.matmul(h, w_att)?;
    let c_recv = g.slice_rows(w_c, 0, params.width)?;
    let c_send = g.slice_rows(w_c, params.width, 2 * params.width)?;
    let recv = g.matmul(z, c_recv)?;
    let send = g.matmul(z, c_send)?;
    let send = g.transpose(send)?;
    let pre = g.add(recv, send)?;
    let act = g.leaky_relu(pre, slope)?;
    let e = g.mul(a, act)?;
    let e = g.masked_fill(e, &mask, MASKED)?;
    let gates = g.softmax_rows(e)?;
    if live_rows.iter().all(|x| *x == 1.0) {
        return Ok(gates);
    }
    let keep = g.input(Tensor::column(&live_rows));
    g.mul(gates, keep)
}

/// One branch: `v = Σ_roles ELU(G_role · (H W_role + b_role))`.
pub fn moganed_branch<'a>(
    g: &mut Graph<'a>,
    store: &'a ParamStore,
    roles: &[MoganedAttnParams; 3],
    h: NodeId,
    adjacency: &RoleAdjacency,
    slope: f64,
) -> Result<NodeId> {
    let mut total = None;
    for (p, a) in roles.iter().zip(adjacency.as_array()) {
        let gate = moganed_attention(g, store, p, h, a, slope)?;
        let w = g.param(store, p.weight);
        let b = g.param(store, p.bias);
        let msg = g.matmul(h, w)?;
        let msg = g.add(msg, b)?;
        let f = g.matmul(gate, msg)?;
        let f = g.elu(f)?;
        total = Some(match total {
            None => f,
            Some(acc) => g.add(acc, f)?,
        });
    }
    Ok(total.expect("three roles"))
}

/// Per-token softmax over branches of `cᵀ tanh(W_s v_t)`; returns the
/// merged representation and the `n x T` weight matrix.
pub fn aggregate_branches<'a>(
    g: &mut Graph<'a>,
    store: &'a ParamStore,
    params: &AggregationParams,
    branches: &[NodeId],
) -> Result<(NodeId, NodeId)> {
    if branches.is_empty() {
        return Err(Error::Config("aggregation needs at least one branch".into()));
    }
    let w_s = g.param(store, params.w_s);
    let c = g.param(store, params.context);
    let mut scores = Vec::with_capacity(branches.len());
    for &v in branches {
        let s = g.matmul(v, w_s)?;
        let s = g.tanh(s)?;
        scores.push(g.matmul(s, c)?);
    }
    let scores = g.concat(&scores)?;
    let weights = g.softmax_rows(scores)?;
    let mut merged = None;
    for (t, &v) in branches.iter().enumerate() {
        let w = g.slice_cols(weights, t, t + 1)?;
        let part = g.mul(w, v)?;
        merged = Some(match merged {
            None => part,
            Some(acc) => g.add(acc, part)?,
        });
    }
    Ok((merged.expect("non-empty"), weights))
}

/// Runs branch `t` (hop order `t + 1`) over `adjacency[t]` and merges them.
pub fn moganed_forward<'a>(
    g: &mut Graph<'a>,
    store: &'a ParamStore,
    hops: &[[MoganedAttnParams; 3]],
    aggregation: &AggregationParams,
    h0: NodeId,
    adjacency: &[RoleAdjacency],
    slope: f64,
) -> Result<NodeId> {
    if hops.len() != adjacency.len() || hops.is_empty() {
        return Err(Error::Config(format!(
            "{} hop parameter sets for {} adjacency branches",
            hops.len(),
            adjacency.len()
        )));
    }
    let branches = hops
        .iter()
        .zip(adjacency)
        .map(|(roles, adj)| moganed_branch(g, store, roles, h0, adj, slope))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate_branches(g, store, aggregation, &branches)?.0)
}
