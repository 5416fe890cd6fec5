//! Reverse-mode automatic differentiation over dense f64 computation graphs.
//!
//! The op set is deliberately small: exactly what the forecasting models and
//! decision losses in this workspace need (affine maps, a handful of
//! elementwise nonlinearities, softmax, concat/slice, reductions, scaled
//! dot-product attention, elementwise product). There is no fusion or graph
//! rewriting; determinism matters more than speed here, and gradients are
//! reproduced bit-for-bit across runs.
//!
//! Custom differentiable nodes (a conic-QP layer, a soft-top-k surrogate)
//! plug in through [`custom::CustomOp`].

pub mod checkpoint;
pub mod custom;
pub mod error;
pub mod fd;
pub mod graph;
pub mod rng;
pub mod tensor;

pub use custom::{CustomKindId, CustomOp, CustomRegistry};
pub use error::{AdError, Result};
pub use graph::{Graph, NodeRef};
pub use tensor::Tensor;
