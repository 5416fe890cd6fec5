//! Memory-based differentiable surrogate for the discrete logistics surface:
//! a KNN over stored (forecast -> plan) pairs whose top-k selection is the
//! smooth closed-form mask of `softtopk`, making the whole prediction
//! differentiable in the query.

pub mod error;
pub mod memory;
pub mod similarity;
pub mod softtopk;
pub mod surrogate;

pub use error::KnnError;
pub use memory::{MemorySet, Metric, WEIGHT_NORM_EPS};
pub use softtopk::{phi, phi_prime, soft_topk, soft_topk_backward, SoftTopK};
pub use surrogate::{
    aggregate, similarity, surrogate_backward, surrogate_forward, Aggregate, SurrogateOp,
};
