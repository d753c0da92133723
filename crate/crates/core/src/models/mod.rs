//! Trigger tagging models: embeddings and a BiLSTM encoder, a graph module
//! (stacked gated convolutions or multi-order attention), and a per-token
//! classifier.

mod classifier;
mod config;
mod conv;
mod encoder;
mod init;
mod model;
mod moganed;

pub use classifier::{argmax_rows, ce_loss, classify_tokens, ClassifierParams};
pub use config::{ModelConfig, ModelDims, ModelKind};
pub use conv::{gated_conv, model1_forward, GatedConvParams, RoleAdjacency};
pub use encoder::{bilstm_encode, embed_tokens, EncoderParams, LstmParams};
pub use model::EventModel;
pub use moganed::{
    aggregate_branches, moganed_attention, moganed_branch, moganed_forward, AggregationParams,
    MoganedAttnParams,
};
