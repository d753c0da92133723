//! Gated graph convolution and the stacked model built from it.

use crate::error::{Error, Result};
use crate::graphs::HomogeneousTriple;
use crate::models::init::Initializer;
use crate::numcore::{Graph, NodeId, ParamId, ParamStore, Tensor};

/// Parameters for one adjacency role in one layer. `weight` is stored
/// `d_in x d_out` so rows of `H` multiply it directly.
#[derive(Clone, Debug, PartialEq)]
pub struct GatedConvParams {
    pub weight: ParamId,
    pub bias: ParamId,
    pub w_att: ParamId,
    pub eps_att: ParamId,
}

impl GatedConvParams {
    pub(crate) fn register(
        store: &mut ParamStore,
        init: &mut Initializer,
        prefix: &str,
        d_in: usize,
        d_out: usize,
    ) -> Result<Self> {
        Ok(GatedConvParams {
            weight: store.add(format!("{prefix}.weight"), init.xavier(d_in, d_out))?,
            bias: store.add(format!("{prefix}.bias"), Tensor::zeros(&[1, d_out]))?,
            w_att: store.add(format!("{prefix}.w_att"), init.xavier(d_in, 1))?,
            eps_att: store.add(format!("{prefix}.eps_att"), Tensor::zeros(&[1, 1]))?,
        })
    }
}

/// Adjacency nodes for the three roles: forward arcs, reverse arcs and
/// self loops.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoleAdjacency {
    pub fwd: NodeId,
    pub rev: NodeId,
    pub identity: NodeId,
}

impl RoleAdjacency {
    pub fn constant(g: &mut Graph<'_>, triple: &HomogeneousTriple) -> Self {
        RoleAdjacency {
            fwd: g.input(triple.fwd.clone()),
            rev: g.input(triple.rev.clone()),
            identity: g.input(triple.identity.clone()),
        }
    }

    pub fn as_array(&self) -> [NodeId; 3] {
        [self.fwd, self.rev, self.identity]
    }
}

/// `F_u = Σ_v A(u,v) · σ(w_att·h_v + ε) · (W h_v + b)`.
pub fn gated_conv<'a>(
    g: &mut Graph<'a>,
    store: &'a ParamStore,
    params: &GatedConvParams,
    h: NodeId,
    a: NodeId,
) -> Result<NodeId> {
    let w = g.param(store, params.weight);
    let b = g.param(store, params.bias);
    let messages = g.matmul(h, w)?;
    let messages = g.add(messages, b)?;
    let w_att = g.param(store, params.w_att);
    let eps = g.param(store, params.eps_att);
    let score = g.matmul(h, w_att)?;
    let score = g.add(score, eps)?;
    let gate = g.sigmoid(score)?;
    let gated = g.mul(messages, gate)?;
    g.matmul(a, gated)
}

/// `h^{k+1}_u = ReLU(Σ_roles f_u(H^k, A_role))` for each layer in turn.
pub fn model1_forward<'a>(
    g: &mut Graph<'a>,
    store: &'a ParamStore,
    layers: &[[GatedConvParams; 3]],
    p: NodeId,
    adjacency: &RoleAdjacency,
) -> Result<NodeId> {
    if layers.is_empty() {
        return Err(Error::Config("model needs at least one graph layer".into()));
    }
    let mut h = p;
    for layer in layers {
        let mut total = None;
        for (role, a) in layer.iter().zip(adjacency.as_array()) {
            let f = gated_conv(g, store, role, h, a)?;
            total = Some(match total {
                None => f,
                Some(acc) => g.add(acc, f)?,
            });
        }
        h = g.relu(total.expect("three roles"))?;
    }
    Ok(h)
}
