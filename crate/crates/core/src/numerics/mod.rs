//! Dense f64 tensors with tape-based reverse-mode differentiation.
//!
//! There is no implicit broadcasting: every binary op requires exactly
//! matching shapes, and reshaping is explicit ([`Graph::stack`],
//! [`Graph::row`], [`Graph::transpose`]).

mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use gradcheck::{grad_check, GradCheckReport};
pub use graph::{dropout_mask, Graph, GruOperands, Unary, Var};
pub use params::{ParamId, ParamStore, Parameter};
pub use tensor::Tensor;
