//! Conic-QP layer as a custom autodiff node. The node's inputs concatenate
//! into the program's parameter vector eta (in input order); its declared
//! outputs are slices of the primal optimum. Three internal output slots
//! carry the raw (x, s, lambda) triple and one carries the Tikhonov weight
//! actually used, so backward can differentiate without re-solving.

use std::sync::Arc;

use autodiff::{CustomOp, Tensor};
use port_model::ConicProgram;

use crate::diff::differentiate;
use crate::error::QpError;
use crate::ipm::{solve_with, SolverOptions};

/// Builds a program from the node's input tensors. The returned program's
/// eta layout must equal the inputs concatenated in order.
pub trait ProgramTemplate: Send + Sync {
    fn build(&self, inputs: &[&Tensor]) -> Result<ConicProgram, String>;
}

impl<F> ProgramTemplate for F
where
    F: Fn(&[&Tensor]) -> Result<ConicProgram, String> + Send + Sync,
{
    fn build(&self, inputs: &[&Tensor]) -> Result<ConicProgram, String> {
        self(inputs)
    }
}

pub struct ConicQpOp {
    name: String,
    template: Arc<dyn ProgramTemplate>,
    /// Primal slices (start, len) exposed as differentiable outputs.
    output_slices: Vec<(usize, usize)>,
    /// Tikhonov ladder: the first weight that solves wins. Escalation is the
    /// standing answer to SingularKkt.
    epsilons: Vec<f64>,
    options: SolverOptions,
}

impl ConicQpOp {
    pub fn new(
        name: impl Into<String>,
        template: Arc<dyn ProgramTemplate>,
        output_slices: Vec<(usize, usize)>,
        epsilons: Vec<f64>,
        options: SolverOptions,
    ) -> Self {
        assert!(!epsilons.is_empty(), "need at least one Tikhonov weight");
        ConicQpOp { name: name.into(), template, output_slices, epsilons, options }
    }

    fn n_declared(&self) -> usize {
        self.output_slices.len()
    }
}

impl CustomOp for ConicQpOp {
    fn name(&self) -> &str {
        &self.name
    }

    fn num_outputs(&self) -> usize {
        // declared slices + x + s + lambda + epsilon
        self.n_declared() + 4
    }

    fn forward(&self, inputs: &[&Tensor]) -> Result<Vec<Tensor>, String> {
        let prog = self.template.build(inputs)?;
        let expected: usize = inputs.iter().map(|t| t.len()).sum();
        if prog.param_dim != expected {
            return Err(format!(
                "program parameter dimension {} does not match input lengths {expected}",
                prog.param_dim
            ));
        }
        let mut last_err: Option<QpError> = None;
        for &eps in &self.epsilons {
            match solve_with(&prog, eps, &self.options) {
                Ok(pt) => {
                    let mut outs = Vec::with_capacity(self.num_outputs());
                    for &(start, len) in &self.output_slices {
                        if start + len > pt.x.len() {
                            return Err(format!("output slice [{start}, {}) out of range", start + len));
                        }
                        outs.push(Tensor::vector(pt.x[start..start + len].to_vec()));
                    }
                    outs.push(Tensor::vector(pt.x.clone()));
                    outs.push(Tensor::vector(pt.s.clone()));
                    outs.push(Tensor::vector(pt.lambda.clone()));
                    outs.push(Tensor::scalar(eps));
                    return Ok(outs);
                }
                Err(e @ QpError::SingularKkt { .. }) | Err(e @ QpError::MaxIter { .. }) => {
                    last_err = Some(e);
                }
                Err(e) => return Err(format!("{e}")),
            }
        }
        Err(format!("{}", last_err.expect("ladder tried at least one weight")))
    }

    fn backward(
        &self,
        inputs: &[&Tensor],
        outputs: &[Tensor],
        out_cotangents: &[Tensor],
    ) -> Result<Vec<Tensor>, String> {
        let prog = self.template.build(inputs)?;
        let k = self.n_declared();
        let x = outputs[k].data();
        let s = outputs[k + 1].data();
        let lambda = outputs[k + 2].data();
        let epsilon = outputs[k + 3].value();

        let mut cot_x = vec![0.0; prog.n];
        for (slice, ct) in self.output_slices.iter().zip(out_cotangents) {
            for (i, g) in ct.data().iter().enumerate() {
                cot_x[slice.0 + i] += g;
            }
        }

        let pt = crate::ipm::KktPoint {
            x: x.to_vec(),
            s: s.to_vec(),
            lambda: lambda.to_vec(),
            status: crate::ipm::SolveStatus::Optimal,
            iterations: 0,
            objective: 0.0,
            epsilon,
            residuals: Default::default(),
        };
        let grad_eta = differentiate(&prog, &pt, &cot_x).map_err(|e| format!("{e}"))?;

        let mut out = Vec::with_capacity(inputs.len());
        let mut off = 0;
        for t in inputs {
            let len = t.len();
            out.push(Tensor::new(t.shape().to_vec(), grad_eta[off..off + len].to_vec()));
            off += len;
        }
        Ok(out)
    }
}
