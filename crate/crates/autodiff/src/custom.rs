//! Extension point for differentiable nodes that are not plain tensor
//! arithmetic (the QP layer and the soft-top-k surrogate plug in here).

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{AdError, Result};
use crate::tensor::Tensor;

/// A custom differentiable node. Implementations must be reentrant: a single
/// instance may be invoked concurrently from distinct graphs.
pub trait CustomOp: Send + Sync {
    fn name(&self) -> &str;

    fn num_outputs(&self) -> usize {
        1
    }

    /// Errors are strings here; the graph wraps them with node context.
    fn forward(&self, inputs: &[&Tensor]) -> std::result::Result<Vec<Tensor>, String>;

    /// One cotangent per input, given cotangents for every output slot.
    fn backward(
        &self,
        inputs: &[&Tensor],
        outputs: &[Tensor],
        out_cotangents: &[Tensor],
    ) -> std::result::Result<Vec<Tensor>, String>;
}

/// Plain-function custom node, enough for stateless extensions.
pub struct FnCustomOp {
    name: String,
    n_outputs: usize,
    fwd: Box<dyn Fn(&[&Tensor]) -> std::result::Result<Vec<Tensor>, String> + Send + Sync>,
    #[allow(clippy::type_complexity)]
    bwd: Box<
        dyn Fn(&[&Tensor], &[Tensor], &[Tensor]) -> std::result::Result<Vec<Tensor>, String>
            + Send
            + Sync,
    >,
}

impl CustomOp for FnCustomOp {
    fn name(&self) -> &str {
        &self.name
    }

    fn num_outputs(&self) -> usize {
        self.n_outputs
    }

    fn forward(&self, inputs: &[&Tensor]) -> std::result::Result<Vec<Tensor>, String> {
        (self.fwd)(inputs)
    }

    fn backward(
        &self,
        inputs: &[&Tensor],
        outputs: &[Tensor],
        out_cotangents: &[Tensor],
    ) -> std::result::Result<Vec<Tensor>, String> {
        (self.bwd)(inputs, outputs, out_cotangents)
    }
}

/// Identifier handed out by [`CustomRegistry::register`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CustomKindId(usize);

/// Named registry of custom node kinds. Registration rejects duplicates so
/// that kind names stay unambiguous in serialized graphs and logs.
#[derive(Default)]
pub struct CustomRegistry {
    by_name: BTreeMap<String, usize>,
    kinds: Vec<Arc<dyn CustomOp>>,
}

impl CustomRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, op: Arc<dyn CustomOp>) -> Result<CustomKindId> {
        let name = op.name().to_string();
        if self.by_name.contains_key(&name) {
            return Err(AdError::DuplicateCustomKind(name));
        }
        let id = self.kinds.len();
        self.kinds.push(op);
        self.by_name.insert(name, id);
        Ok(CustomKindId(id))
    }

    pub fn register_fns(
        &mut self,
        name: &str,
        n_outputs: usize,
        fwd: impl Fn(&[&Tensor]) -> std::result::Result<Vec<Tensor>, String> + Send + Sync + 'static,
        bwd: impl Fn(&[&Tensor], &[Tensor], &[Tensor]) -> std::result::Result<Vec<Tensor>, String>
            + Send
            + Sync
            + 'static,
    ) -> Result<CustomKindId> {
        self.register(Arc::new(FnCustomOp {
            name: name.to_string(),
            n_outputs,
            fwd: Box::new(fwd),
            bwd: Box::new(bwd),
        }))
    }

    pub fn get(&self, id: CustomKindId) -> Arc<dyn CustomOp> {
        Arc::clone(&self.kinds[id.0])
    }

    pub fn lookup(&self, name: &str) -> Result<Arc<dyn CustomOp>> {
        self.by_name
            .get(name)
            .map(|&i| Arc::clone(&self.kinds[i]))
            .ok_or_else(|| AdError::UnknownCustomKind(name.to_string()))
    }
}
