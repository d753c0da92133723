//! Tensors, a reverse-mode differentiation graph, the Adam optimizer and a
//! central-difference gradient checker.

mod adam;
mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{finite_diff_check, finite_diff_check_subset, GradCheckReport, ParamCheck};
pub use graph::{Gradients, Graph, NodeId, Op};
pub use params::{GradStore, ParamId, ParamStore};
pub use tensor::Tensor;

pub(crate) use graph::softmax_into;
