use crate::corpus::EncodedSentence;
use crate::error::{Error, Result};
use crate::graphs::{build_labeled_adjacency, collapse_homogeneous, matrix_power, Direction};
use crate::gtn::{combine, metapath_product, GtnCombination, MetaPathChain};
use crate::models::classifier::{argmax_rows, ce_loss, classify_tokens, ClassifierParams};
use crate::models::conv::{model1_forward, GatedConvParams, RoleAdjacency};
use crate::models::encoder::{bilstm_encode, embed_tokens, EncoderParams};
use crate::models::init::Initializer;
use crate::models::moganed::{moganed_forward, AggregationParams, MoganedAttnParams};
use crate::models::{ModelConfig, ModelKind};
use crate::numcore::{GradStore, Graph, NodeId, ParamStore, Tensor};

const ROLES: [&str; 3] = ["fwd", "rev", "loop"];

#[derive(Clone, Debug)]
enum Body {
    Gcn {
        layers: Vec<[GatedConvParams; 3]>,
        /// Forward and reverse combinations, shared by every layer.
        gtn: Option<[GtnCombination; 2]>,
    },
    Moganed {
        hops: Vec<[MoganedAttnParams; 3]>,
        aggregation: AggregationParams,
        /// Forward and reverse chains for each hop order.
        gtn: Option<Vec<[MetaPathChain; 2]>>,
    },
}

/// A complete trigger tagger: encoder, graph module and classifier, with
/// its parameters.
#[derive(Clone, Debug)]
pub struct EventModel {
    config: ModelConfig,
    store: ParamStore,
    encoder: EncoderParams,
    body: Body,
    classifier: ClassifierParams,
}

impl EventModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut init = Initializer::new(config.init_seed);
        let d = config.dims;
        let encoder = EncoderParams::register(&mut store, &mut init, &config)?;
        let mut body = match config.kind {
            ModelKind::Gcn { layers } => {
                let layers = (0..layers)
                    .map(|k| {
                        let d_in = if k == 0 { d.context() } else { d.graph };
                        let mut roles = ROLES.iter().map(|r| {
                            GatedConvParams::register(
                                &mut store,
                                &mut init,
                                &format!("gcn.{k}.{r}"),
                                d_in,
                                d.graph,
                            )
                        });
                        let mut next = || roles.next().expect("three roles");
                        Ok([next()?, next()?, next()?])
                    })
                    .collect::<Result<Vec<_>>>()?;
                Body::Gcn { layers, gtn: None }
            }
            ModelKind::Moganed { hops } => {
                let hops = (1..=hops)
                    .map(|t| {
                        let mut roles = ROLES.iter().map(|r| {
                            MoganedAttnParams::register(
                                &mut store,
                                &mut init,
                                &format!("moganed.hop{t}.{r}"),
                                d.context(),
                                d.graph,
                                d.attention,
                            )
                        });
                        let mut next = || roles.next().expect("three roles");
                        Ok([next()?, next()?, next()?])
                    })
                    .collect::<Result<Vec<_>>>()?;
                let aggregation =
                    AggregationParams::register(&mut store, &mut init, d.graph, d.aggregation)?;
                Body::Moganed { hops, aggregation, gtn: None }
            }
        };
        let classifier = ClassifierParams::register(
            &mut store,
            &mut init,
            d.graph,
            d.mlp_hidden,
            config.num_classes,
        )?;
        // Edge-type weights start at zero and draw nothing from the RNG, so
        // the remaining parameters match the label-blind model exactly.
        if config.gtn {
            let l = config.num_labels;
            match &mut body {
                Body::Gcn { gtn, .. } => {
                    *gtn = Some([
                        GtnCombination::register(&mut store, "gtn.fwd", l)?,
                        GtnCombination::register(&mut store, "gtn.rev", l)?,
                    ]);
                }
                Body::Moganed { hops, gtn, .. } => {
                    let chains = (1..=hops.len())
                        .map(|t| {
                            Ok([
                                MetaPathChain::register(
                                    &mut store,
                                    &format!("gtn.hop{t}.fwd"),
                                    Direction::Forward,
                                    l,
                                    t,
                                )?,
                                MetaPathChain::register(
                                    &mut store,
                                    &format!("gtn.hop{t}.rev"),
                                    Direction::Reverse,
                                    l,
                                    t,
                                )?,
                            ])
                        })
                        .collect::<Result<Vec<_>>>()?;
                    *gtn = Some(chains);
                }
            }
        }
        Ok(EventModel { config, store, encoder, body, classifier })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn encoder(&self) -> &EncoderParams {
        &self.encoder
    }

    /// Every edge-type combination in the model, in registration order.
    pub fn gtn_combinations(&self) -> Vec<&GtnCombination> {
        match &self.body {
            Body::Gcn { gtn, .. } => gtn.iter().flatten().collect(),
            Body::Moganed { gtn, .. } => gtn
                .iter()
                .flatten()
                .flat_map(|pair| pair.iter().flat_map(|c| c.factors.iter()))
                .collect(),
        }
    }

    /// Builds the graph for one sentence and returns the `n x (C+1)`
    /// logits node.
    pub fn forward<'a>(&'a self, g: &mut Graph<'a>, sentence: &EncodedSentence) -> Result<NodeId> {
        let store = &self.store;
        if sentence.len() > self.config.max_len {
            return Err(Error::Config(format!(
                "sentence of {} tokens exceeds max_len {}",
                sentence.len(),
                self.config.max_len
            )));
        }
        let x = embed_tokens(g, store, &self.encoder, sentence)?;
        let p = bilstm_encode(g, store, &self.encoder, x)?;
        let set = build_labeled_adjacency(sentence, self.config.num_labels)?;
        let h = match &self.body {
            Body::Gcn { layers, gtn } => {
                let adjacency = match gtn {
                    None => RoleAdjacency::constant(g, &collapse_homogeneous(&set)),
                    Some([fwd, rev]) => RoleAdjacency {
                        fwd: combine(g, store, fwd, set.fwd())?,
                        rev: combine(g, store, rev, set.rev())?,
                        identity: g.input(set.identity().clone()),
                    },
                };
                model1_forward(g, store, layers, p, &adjacency)?
            }
            Body::Moganed { hops, aggregation, gtn } => {
                let identity = g.input(set.identity().clone());
                let adjacency = match gtn {
                    None => {
                        let triple = collapse_homogeneous(&set);
                        (1..=hops.len())
                            .map(|t| {
                                Ok(RoleAdjacency {
                                    fwd: g.input(matrix_power(&triple.fwd, t)?),
                                    rev: g.input(matrix_power(&triple.rev, t)?),
                                    identity,
                                })
                            })
                            .collect::<Result<Vec<_>>>()?
                    }
                    Some(chains) => chains
                        .iter()
                        .map(|[fwd, rev]| {
                            Ok(RoleAdjacency {
                                fwd: metapath_product(g, store, fwd, &set)?,
                                rev: metapath_product(g, store, rev, &set)?,
                                identity,
                            })
                        })
                        .collect::<Result<Vec<_>>>()?,
                };
                moganed_forward(g, store, hops, aggregation, p, &adjacency, self.config.leaky_slope)?
            }
        };
        classify_tokens(g, store, &self.classifier, h)
    }

    pub fn logits(&self, sentence: &EncodedSentence) -> Result<Tensor> {
        let mut g = Graph::new();
        let out = self.forward(&mut g, sentence)?;
        Ok(g.value(out).clone())
    }

    /// Predicted class id per token.
    pub fn predict(&self, sentence: &EncodedSentence) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.logits(sentence)?))
    }

    /// Mean token cross-entropy of one sentence.
    pub fn loss(&self, sentence: &EncodedSentence) -> Result<f64> {
        let mut g = Graph::new();
        let logits = self.forward(&mut g, sentence)?;
        let loss = ce_loss(&mut g, logits, &sentence.gold)?;
        Ok(g.value(loss).data()[0])
    }

    /// Adds `scale · ∂loss/∂θ` into `grads` and returns the unscaled loss.
    pub fn accumulate_gradients(
        &self,
        sentence: &EncodedSentence,
        scale: f64,
        grads: &mut GradStore,
    ) -> Result<f64> {
        let mut g = Graph::new();
        let logits = self.forward(&mut g, sentence)?;
        let loss = ce_loss(&mut g, logits, &sentence.gold)?;
        g.backward_scaled(loss, scale, grads)?;
        Ok(g.value(loss).data()[0])
    }
}
