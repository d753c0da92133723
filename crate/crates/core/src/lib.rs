pub mod corpus;
pub mod error;
pub mod eval;
pub mod graphs;
pub mod gtn;
pub mod models;
pub mod numcore;

pub use error::{Error, Result};
