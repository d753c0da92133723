use crate::error::Result;
use crate::models::init::Initializer;
use crate::numcore::{Graph, NodeId, ParamId, ParamStore, Tensor};

/// Two-layer per-token MLP producing `C + 1` logits.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierParams {
    pub hidden_weight: ParamId,
    pub hidden_bias: ParamId,
    pub out_weight: ParamId,
    pub out_bias: ParamId,
}

impl ClassifierParams {
    pub(crate) fn register(
        store: &mut ParamStore,
        init: &mut Initializer,
        d_in: usize,
        hidden: usize,
        classes: usize,
    ) -> Result<Self> {
        Ok(ClassifierParams {
            hidden_weight: store.add("cls.hidden.weight", init.xavier(d_in, hidden))?,
            hidden_bias: store.add("cls.hidden.bias", Tensor::zeros(&[1, hidden]))?,
            out_weight: store.add("cls.out.weight", init.xavier(hidden, classes))?,
            out_bias: store.add("cls.out.bias", Tensor::zeros(&[1, classes]))?,
        })
    }
}

pub fn classify_tokens<'a>(
    g: &mut Graph<'a>,
    store: &'a ParamStore,
    params: &ClassifierParams,
    h: NodeId,
) -> Result<NodeId> {
    let w1 = g.param(store, params.hidden_weight);
    let b1 = g.param(store, params.hidden_bias);
    let w2 = g.param(store, params.out_weight);
    let b2 = g.param(store, params.out_bias);
    let z = g.matmul(h, w1)?;
    let z = g.add(z, b1)?;
    let z = g.relu(z)?;
    let logits = g.matmul(z, w2)?;
    g.add(logits, b2)
}

/// Mean token cross-entropy over the sentence.
pub fn ce_loss(g: &mut Graph<'_>, logits: NodeId, gold: &[usize]) -> Result<NodeId> {
    g.cross_entropy(logits, gold)
}

/// Row-wise argmax; ties go to the lowest class id.
pub fn argmax_rows(logits: &Tensor) -> Vec<usize> {
    (0..logits.rows())
        .map(|r| {
            let row = logits.row_slice(r);
            let mut best = 0;
            for (j, v) in row.iter().enumerate().skip(1) {
                if *v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
