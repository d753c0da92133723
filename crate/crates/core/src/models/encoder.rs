//! Token embeddings followed by a bidirectional LSTM.

use crate::corpus::EncodedSentence;
use crate::error::{Error, Result};
use crate::models::init::Initializer;
use crate::models::ModelConfig;
use crate::numcore::{Graph, NodeId, ParamId, ParamStore, Tensor};

/// One LSTM direction. Gate blocks along the `4h` axis are ordered
/// input, forget, candidate, output.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub bias: ParamId,
    pub hidden: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    pub word: ParamId,
    pub pos: ParamId,
    pub ner: ParamId,
    pub position: ParamId,
    pub forward: LstmParams,
    pub backward: LstmParams,
}

impl LstmParams {
    fn register(
        store: &mut ParamStore,
        init: &mut Initializer,
        prefix: &str,
        input: usize,
        hidden: usize,
    ) -> Result<Self> {
        Ok(LstmParams {
            w_ih: store.add(format!("{prefix}.w_ih"), init.xavier(input, 4 * hidden))?,
            w_hh: store.add(format!("{prefix}.w_hh"), init.xavier(hidden, 4 * hidden))?,
            bias: store.add(format!("{prefix}.bias"), Tensor::zeros(&[1, 4 * hidden]))?,
            hidden,
        })
    }
}

impl EncoderParams {
    pub(crate) fn register(
        store: &mut ParamStore,
        init: &mut Initializer,
        config: &ModelConfig,
    ) -> Result<Self> {
        let d = &config.dims;
        let word = store.add("embed.word", init.xavier(config.word_vocab, d.word))?;
        let pos = store.add("embed.pos", init.xavier(config.pos_vocab, d.feature))?;
        let ner = store.add("embed.ner", init.xavier(config.ner_vocab, d.feature))?;
        let position = store.add("embed.position", init.xavier(config.max_len, d.feature))?;
        let forward = LstmParams::register(store, init, "lstm.fwd", d.input(), d.lstm_hidden)?;
        let backward = LstmParams::register(store, init, "lstm.bwd", d.input(), d.lstm_hidden)?;
        Ok(EncoderParams { word, pos, ner, position, forward, backward })
    }
}

/// Concatenates word, POS, NER and position embeddings per token.
pub fn embed_tokens<'a>(
    g: &mut Graph<'a>,
    store: &'a ParamStore,
    params: &EncoderParams,
    sentence: &EncodedSentence,
) -> Result<NodeId> {
    let n = sentence.len();
    if n == 0 {
        return Err(Error::Config("cannot embed an empty sentence".into()));
    }
    let lens = [sentence.pos.len(), sentence.ner.len(), sentence.positions.len()];
    if lens.iter().any(|&l| l != n) {
        return Err(Error::Shape {
            op: "embed_tokens",
            shapes: std::iter::once(n).chain(lens).map(|l| vec![l]).collect(),
        });
    }
    let mut parts = Vec::with_capacity(4);
    for (table, ids) in [
        (params.word, &sentence.words),
        (params.pos, &sentence.pos),
        (params.ner, &sentence.ner),
        (params.position, &sentence.positions),
    ] {
        let t = g.param(store, table);
        parts.push(g.gather(t, ids)?);
    }
    g.concat(&parts)
}

fn run_direction<'a>(
    g: &mut Graph<'a>,
    store: &'a ParamStore,
    lstm: &LstmParams,
    x: NodeId,
    order: impl Iterator<Item = usize>,
) -> Result<Vec<NodeId>> {
    let n = g.value(x).rows();
    let h = lstm.hidden;
    let w_ih = g.param(store, lstm.w_ih);
    let w_hh = g.param(store, lstm.w_hh);
    let bias = g.param(store, lstm.bias);
    let projected = g.matmul(x, w_ih)?;
    let projected = g.add(projected, bias)?;

    let mut outputs = vec![None; n];
    let mut state: Option<(NodeId, NodeId)> = None;
    for t in order {
        let mut z = g.slice_rows(projected, t, t + 1)?;
        if let Some((h_prev, _)) = state {
            let rec = g.matmul(h_prev, w_hh)?;
            z = g.add(z, rec)?;
        }
        let i = g.slice_cols(z, 0, h)?;
        let i = g.sigmoid(i)?;
        let cand = g.slice_cols(z, 2 * h, 3 * h)?;
        let cand = g.tanh(cand)?;
        let o = g.slice_cols(z, 3 * h, 4 * h)?;
        let o = g.sigmoid(o)?;
        let mut c = g.mul(i, cand)?;
        if let Some((_, c_prev)) = state {
            let f = g.slice_cols(z, h, 2 * h)?;
            let f = g.sigmoid(f)?;
            let kept = g.mul(f, c_prev)?;
            c = g.add(kept, c)?;
        }
        let squashed = g.tanh(c)?;
        let h_t = g.mul(o, squashed)?;
        outputs[t] = Some(h_t);
        state = Some((h_t, c));
    }
    Ok(outputs.into_iter().map(|o| o.expect("every position visited")).collect())
}

/// `P = [LSTM→(X) || LSTM←(X)]`, one row per token.
pub fn bilstm_encode<'a>(
    g: &mut Graph<'a>,
    store: &'a ParamStore,
    params: &EncoderParams,
    x: NodeId,
) -> Result<NodeId> {
    let n = g.value(x).rows();
    if n == 0 {
        return Err(Error::Config("cannot encode an empty sentence".into()));
    }
    let fwd = run_direction(g, store, &params.forward, x, 0..n)?;
    let bwd = run_direction(g, store, &params.backward, x, (0..n).rev())?;
    let fwd = g.concat_rows(&fwd)?;
    let bwd = g.concat_rows(&bwd)?;
    g.concat(&[fwd, bwd])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelDims, ModelKind};

    fn config() -> ModelConfig {
        ModelConfig {
            kind: ModelKind::Gcn { layers: 1 },
            gtn: false,
            dims: ModelDims::tiny(),
            word_vocab: 5,
            pos_vocab: 4,
            ner_vocab: 3,
            num_labels: 2,
            num_classes: 3,
            max_len: 8,
            leaky_slope: 0.2,
            init_seed: 9,
        }
    }

    fn setup() -> (ParamStore, EncoderParams) {
        let mut store = ParamStore::new();
        let mut init = Initializer::new(1);
        let p = EncoderParams::register(&mut store, &mut init, &config()).unwrap();
        (store, p)
    }

    fn sentence(words: &[usize]) -> EncodedSentence {
        let n = words.len();
        EncodedSentence {
            words: words.to_vec(),
            pos: vec![1; n],
            ner: vec![0; n],
            positions: (0..n).collect(),
            edges: vec![],
            gold: vec![0; n],
        }
    }

    #[test]
    fn unknown_token_row_is_index_zero_rows() {
        let (store, p) = setup();
        let mut s = sentence(&[0]);
        s.pos = vec![0];
        let mut g = Graph::new();
        let x = embed_tokens(&mut g, &store, &p, &s).unwrap();
        let expect: Vec<f64> = [p.word, p.pos, p.ner, p.position]
            .iter()
            .flat_map(|id| store.get(*id).row_slice(0).to_vec())
            .collect();
        assert_eq!(g.value(x).data(), expect.as_slice());
        assert_eq!(g.shape(x), &[1, config().dims.input()]);
    }

    #[test]
    fn identical_tokens_differ_only_in_position() {
        let (store, p) = setup();
        let mut g = Graph::new();
        let x = embed_tokens(&mut g, &store, &p, &sentence(&[3, 3])).unwrap();
        let v = g.value(x);
        let split = config().dims.word + 2 * config().dims.feature;
        assert_eq!(v.row_slice(0)[..split], v.row_slice(1)[..split]);
        assert_ne!(v.row_slice(0)[split..], v.row_slice(1)[split..]);
    }

    #[test]
    fn out_of_range_ids_are_rejected() {
        let (store, p) = setup();
        let mut g = Graph::new();
        assert!(embed_tokens(&mut g, &store, &p, &sentence(&[5])).is_err());
        let mut long = sentence(&[1; 9]);
        long.positions = (0..9).collect();
        assert!(embed_tokens(&mut g, &store, &p, &long).is_err());
    }

    #[test]
    fn zero_network_encodes_to_zero() {
        let (mut store, p) = setup();
        for id in store.ids().collect::<Vec<_>>() {
            store.get_mut(id).data_mut().iter_mut().for_each(|x| *x = 0.0);
        }
        let mut g = Graph::new();
        let x = embed_tokens(&mut g, &store, &p, &sentence(&[1, 2, 3])).unwrap();
        let out = bilstm_encode(&mut g, &store, &p, x).unwrap();
        assert_eq!(g.shape(out), &[3, 6]);
        assert!(g.value(out).data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_token_shape() {
        let (store, p) = setup();
        let mut g = Graph::new();
        let x = embed_tokens(&mut g, &store, &p, &sentence(&[2])).unwrap();
        let out = bilstm_encode(&mut g, &store, &p, x).unwrap();
        assert_eq!(g.shape(out), &[1, 6]);
    }

    #[test]
    fn reversal_swaps_directions_with_tied_weights() {
        let (mut store, p) = setup();
        for (src, dst) in [
            (p.forward.w_ih, p.backward.w_ih),
            (p.forward.w_hh, p.backward.w_hh),
            (p.forward.bias, p.backward.bias),
        ] {
            let v = store.get(src).clone();
            *store.get_mut(dst) = v;
        }
        let rows = [
            vec![0.3, -0.2, 0.5, 0.1, 0.0, 0.7, -0.4, 0.2, 0.9, -0.1, 0.3, 0.6, -0.5],
            vec![-0.6, 0.4, 0.0, 0.2, 0.8, -0.3, 0.1, 0.5, -0.2, 0.4, 0.0, -0.7, 0.3],
            vec![0.2, 0.2, -0.9, 0.6, -0.1, 0.0, 0.4, -0.3, 0.5, 0.1, -0.6, 0.2, 0.8],
            vec![0.5, -0.5, 0.3, -0.3, 0.1, 0.2, 0.0, 0.6, -0.4, 0.7, 0.2, -0.1, 0.0],
        ];
        let x = Tensor::from_rows(&rows).unwrap();
        let mut reversed_rows = rows.to_vec();
        reversed_rows.reverse();
        let xr = Tensor::from_rows(&reversed_rows).unwrap();

        let mut g = Graph::new();
        let a = g.input(x);
        let pa = bilstm_encode(&mut g, &store, &p, a).unwrap();
        let b = g.input(xr);
        let pb = bilstm_encode(&mut g, &store, &p, b).unwrap();
        let (pa, pb) = (g.value(pa), g.value(pb));
        let h = 3;
        for i in 0..4 {
            let orig = pa.row_slice(3 - i);
            let rev = pb.row_slice(i);
            assert_eq!(rev[..h], orig[h..]);
            assert_eq!(rev[h..], orig[..h]);
        }
    }
}
