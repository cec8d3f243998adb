//! Minimal reverse-mode automatic differentiation over `f64` matrices.
//!
//! A [`Graph`] records every operation applied to [`Var`] handles. Calling
//! [`Graph::backward`] on a `1 x 1` node walks the tape in reverse and
//! returns [`Grads`] for every node that depends on a trainable leaf.
//! Only the operations the point-cloud networks need are provided.

mod adam;
mod graph;
pub mod numeric;
mod params;

pub use adam::{Adam, AdamConfig};
pub use graph::{Grads, Graph, Var};
pub use params::{Bound, ParamSet};
