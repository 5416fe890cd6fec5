//! Computation graph: a flat arena of op records in insertion order, which
//! is topological by construction (a node can only reference earlier nodes).
//! Forward caches per-node outputs; backward walks the arena in exact
//! reverse order, so gradients are bit-identical across runs.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::custom::CustomOp;
use crate::error::{AdError, Result};
use crate::tensor::Tensor;

/// Reference to one output slot of a node. Built-in ops have a single slot;
/// custom ops may expose several.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeRef {
    pub node: usize,
    pub slot: usize,
}

impl NodeRef {
    fn single(node: usize) -> Self {
        NodeRef { node, slot: 0 }
    }
}

pub(crate) enum OpKind {
    /// Per-call input slot, bound at forward time.
    Input(String),
    /// Named parameter slot; value lives in the graph.
    Param(String),
    /// Constant tensor.
    Const(Tensor),
    /// x[r,n] * w[n,m] + b[m]; x may be rank-1 (one row).
    Affine,
    /// sum_i coeffs[i] * x_i (+ base), all same shape.
    Lincomb { coeffs: Vec<f64>, base: Option<Tensor> },
    Tanh,
    Relu,
    Exp,
    Log,
    Abs,
    /// x / sqrt(x^2 + eps^2), a smooth sign.
    SignSmooth { eps: f64 },
    /// 1-D softmax.
    Softmax,
    /// 1-D concatenation of the inputs.
    Concat,
    /// 1-D slice [start, start+len).
    Slice { start: usize, len: usize },
    Mean,
    Sum,
    /// Elementwise product of two same-shape tensors.
    Mul,
    /// Scaled dot-product attention: softmax(Q K^T / sqrt(d)) V, all [j,d].
    Attention,
    Custom(Arc<dyn CustomOp>),
}

impl OpKind {
    fn name(&self) -> String {
        match self {
            OpKind::Input(n) => format!("input:{n}"),
            OpKind::Param(n) => format!("param:{n}"),
            OpKind::Const(_) => "const".into(),
            OpKind::Affine => "affine".into(),
            OpKind::Lincomb { .. } => "lincomb".into(),
            OpKind::Tanh => "tanh".into(),
            OpKind::Relu => "relu".into(),
            OpKind::Exp => "exp".into(),
            OpKind::Log => "log".into(),
            OpKind::Abs => "abs".into(),
            OpKind::SignSmooth { .. } => "sign_smooth".into(),
            OpKind::Softmax => "softmax".into(),
            OpKind::Concat => "concat".into(),
            OpKind::Slice { .. } => "slice".into(),
            OpKind::Mean => "mean".into(),
            OpKind::Sum => "sum".into(),
            OpKind::Mul => "mul".into(),
            OpKind::Attention => "attention".into(),
            OpKind::Custom(op) => format!("custom:{}", op.name()),
        }
    }

    fn num_outputs(&self) -> usize {
        match self {
            OpKind::Custom(op) => op.num_outputs(),
            _ => 1,
        }
    }
}

pub(crate) struct Node {
    pub op: OpKind,
    pub inputs: Vec<NodeRef>,
}

struct ForwardState {
    /// outputs[node][slot]
    values: Vec<Vec<Tensor>>,
}

pub struct Graph {
    nodes: Vec<Node>,
    params: BTreeMap<String, (usize, Tensor)>,
    inputs: BTreeMap<String, usize>,
    outputs: BTreeMap<String, NodeRef>,
    state: Option<ForwardState>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            params: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            state: None,
        }
    }

    fn push(&mut self, op: OpKind, inputs: Vec<NodeRef>) -> NodeRef {
        for r in &inputs {
            assert!(r.node < self.nodes.len(), "input node must precede its consumer");
            assert!(r.slot < self.nodes[r.node].op.num_outputs(), "bad output slot");
        }
        self.nodes.push(Node { op, inputs });
        NodeRef::single(self.nodes.len() - 1)
    }

    pub fn input(&mut self, name: &str) -> NodeRef {
        let r = self.push(OpKind::Input(name.to_string()), vec![]);
        self.inputs.insert(name.to_string(), r.node);
        r
    }

    pub fn param(&mut self, name: &str, value: Tensor) -> NodeRef {
        let r = self.push(OpKind::Param(name.to_string()), vec![]);
        self.params.insert(name.to_string(), (r.node, value));
        r
    }

    pub fn constant(&mut self, value: Tensor) -> NodeRef {
        self.push(OpKind::Const(value), vec![])
    }

    pub fn set_param(&mut self, name: &str, value: Tensor) {
        let entry = self
            .params
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter '{name}'"));
        entry.1 = value;
    }

    pub fn param_value(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name).map(|(_, t)| t)
    }

    pub fn param_names(&self) -> impl Iterator<Item = &String> {
        self.params.keys()
    }

    pub fn affine(&mut self, x: NodeRef, w: NodeRef, b: NodeRef) -> NodeRef {
        self.push(OpKind::Affine, vec![x, w, b])
    }

    pub fn lincomb(&mut self, terms: &[(f64, NodeRef)], base: Option<Tensor>) -> NodeRef {
        let coeffs = terms.iter().map(|(c, _)| *c).collect();
        let inputs = terms.iter().map(|(_, r)| *r).collect();
        self.push(OpKind::Lincomb { coeffs, base }, inputs)
    }

    pub fn add(&mut self, a: NodeRef, b: NodeRef) -> NodeRef {
        self.lincomb(&[(1.0, a), (1.0, b)], None)
    }

    pub fn sub(&mut self, a: NodeRef, b: NodeRef) -> NodeRef {
        self.lincomb(&[(1.0, a), (-1.0, b)], None)
    }

    pub fn scale(&mut self, c: f64, a: NodeRef) -> NodeRef {
        self.lincomb(&[(c, a)], None)
    }

    pub fn tanh(&mut self, x: NodeRef) -> NodeRef {
        self.push(OpKind::Tanh, vec![x])
    }

    pub fn relu(&mut self, x: NodeRef) -> NodeRef {
        self.push(OpKind::Relu, vec![x])
    }

    pub fn exp(&mut self, x: NodeRef) -> NodeRef {
        self.push(OpKind::Exp, vec![x])
    }

    pub fn log(&mut self, x: NodeRef) -> NodeRef {
        self.push(OpKind::Log, vec![x])
    }

    pub fn abs(&mut self, x: NodeRef) -> NodeRef {
        self.push(OpKind::Abs, vec![x])
    }

    pub fn sign_smooth(&mut self, x: NodeRef, eps: f64) -> NodeRef {
        self.push(OpKind::SignSmooth { eps }, vec![x])
    }

    pub fn softmax(&mut self, x: NodeRef) -> NodeRef {
        self.push(OpKind::Softmax, vec![x])
    }

    pub fn concat(&mut self, xs: &[NodeRef]) -> NodeRef {
        self.push(OpKind::Concat, xs.to_vec())
    }

    pub fn slice(&mut self, x: NodeRef, start: usize, len: usize) -> NodeRef {
        self.push(OpKind::Slice { start, len }, vec![x])
    }

    pub fn mean(&mut self, x: NodeRef) -> NodeRef {
        self.push(OpKind::Mean, vec![x])
    }

    pub fn sum(&mut self, x: NodeRef) -> NodeRef {
        self.push(OpKind::Sum, vec![x])
    }

    pub fn mul(&mut self, a: NodeRef, b: NodeRef) -> NodeRef {
        self.push(OpKind::Mul, vec![a, b])
    }

    pub fn attention(&mut self, q: NodeRef, k: NodeRef, v: NodeRef) -> NodeRef {
        self.push(OpKind::Attention, vec![q, k, v])
    }

    /// <a, b> as a scalar node.
    pub fn dot(&mut self, a: NodeRef, b: NodeRef) -> NodeRef {
        let p = self.mul(a, b);
        self.sum(p)
    }

    pub fn custom(&mut self, op: Arc<dyn CustomOp>, inputs: &[NodeRef]) -> Vec<NodeRef> {
        let n_out = op.num_outputs();
        let r = self.push(OpKind::Custom(op), inputs.to_vec());
        (0..n_out).map(|slot| NodeRef { node: r.node, slot }).collect()
    }

    pub fn mark_output(&mut self, name: &str, r: NodeRef) {
        self.outputs.insert(name.to_string(), r);
    }

    /// Runs the graph on the given inputs. Node values are cached for a
    /// subsequent `backward`. Returns the tensors marked via `mark_output`.
    pub fn forward(&mut self, inputs: &BTreeMap<String, Tensor>) -> Result<BTreeMap<String, Tensor>> {
        for name in inputs.keys() {
            if !self.inputs.contains_key(name) {
                return Err(AdError::UnknownInput(name.clone()));
            }
        }
        let mut values: Vec<Vec<Tensor>> = Vec::with_capacity(self.nodes.len());
        for (id, node) in self.nodes.iter().enumerate() {
            let get = |r: &NodeRef| -> &Tensor { &values[r.node][r.slot] };
            let outs: Vec<Tensor> = match &node.op {
                OpKind::Input(name) => {
                    let t = inputs
                        .get(name)
                        .ok_or_else(|| AdError::UnboundInput(name.clone()))?;
                    vec![t.clone()]
                }
                OpKind::Param(name) => vec![self.params[name].1.clone()],
                OpKind::Const(t) => vec![t.clone()],
                OpKind::Affine => {
                    let (x, w, b) = (get(&node.inputs[0]), get(&node.inputs[1]), get(&node.inputs[2]));
                    vec![affine_fwd(id, x, w, b)?]
                }
                OpKind::Lincomb { coeffs, base } => {
                    let xs: Vec<&Tensor> = node.inputs.iter().map(get).collect();
                    vec![lincomb_fwd(id, coeffs, base.as_ref(), &xs)?]
                }
                OpKind::Tanh => vec![map_fwd(get(&node.inputs[0]), f64::tanh)],
                OpKind::Relu => vec![map_fwd(get(&node.inputs[0]), |v| v.max(0.0))],
                OpKind::Exp => vec![map_fwd(get(&node.inputs[0]), f64::exp)],
                OpKind::Log => vec![map_fwd(get(&node.inputs[0]), f64::ln)],
                OpKind::Abs => vec![map_fwd(get(&node.inputs[0]), f64::abs)],
                OpKind::SignSmooth { eps } => {
                    let e2 = eps * eps;
                    vec![map_fwd(get(&node.inputs[0]), |v| v / (v * v + e2).sqrt())]
                }
                OpKind::Softmax => vec![softmax_fwd(get(&node.inputs[0]))],
                OpKind::Concat => {
                    let xs: Vec<&Tensor> = node.inputs.iter().map(get).collect();
                    let mut data = Vec::new();
                    for x in xs {
                        data.extend_from_slice(x.data());
                    }
                    vec![Tensor::vector(data)]
                }
                OpKind::Slice { start, len } => {
                    let x = get(&node.inputs[0]);
                    if start + len > x.len() {
                        return Err(AdError::Shape {
                            node: id,
                            msg: format!("slice [{start}, {}) out of range {}", start + len, x.len()),
                        });
                    }
                    vec![Tensor::vector(x.data()[*start..start + len].to_vec())]
                }
                OpKind::Mean => {
                    let x = get(&node.inputs[0]);
                    vec![Tensor::scalar(x.data().iter().sum::<f64>() / x.len() as f64)]
                }
                OpKind::Sum => {
                    let x = get(&node.inputs[0]);
                    vec![Tensor::scalar(x.data().iter().sum::<f64>())]
                }
                OpKind::Mul => {
                    let (a, b) = (get(&node.inputs[0]), get(&node.inputs[1]));
                    if a.shape() != b.shape() {
                        return Err(AdError::Shape {
                            node: id,
                            msg: format!("mul shapes {:?} vs {:?}", a.shape(), b.shape()),
                        });
                    }
                    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
                    vec![Tensor::new(a.shape().to_vec(), data)]
                }
                OpKind::Attention => {
                    let (q, k, v) = (get(&node.inputs[0]), get(&node.inputs[1]), get(&node.inputs[2]));
                    vec![attention_fwd(id, q, k, v)?]
                }
                OpKind::Custom(op) => {
                    let xs: Vec<&Tensor> = node.inputs.iter().map(get).collect();
                    let outs = op.forward(&xs).map_err(|msg| AdError::Custom {
                        op: op.name().to_string(),
                        msg,
                    })?;
                    if outs.len() != op.num_outputs() {
                        return Err(AdError::Custom {
                            op: op.name().to_string(),
                            msg: format!("expected {} outputs, got {}", op.num_outputs(), outs.len()),
                        });
                    }
                    outs
                }
            };
            for t in &outs {
                if !t.all_finite() {
                    return Err(AdError::NonFinite { node: id, op: node.op.name() });
                }
            }
            values.push(outs);
        }
        let mut named = BTreeMap::new();
        for (name, r) in &self.outputs {
            named.insert(name.clone(), values[r.node][r.slot].clone());
        }
        self.state = Some(ForwardState { values });
        Ok(named)
    }

    pub fn output_value(&self, r: NodeRef) -> Option<&Tensor> {
        self.state.as_ref().map(|s| &s.values[r.node][r.slot])
    }

    /// Reverse pass from a scalar loss node. Returns d(loss)/d(param) for
    /// every declared parameter; parameters the loss does not reach get a
    /// zero gradient.
    pub fn backward(&mut self, loss: NodeRef, seed: f64) -> Result<BTreeMap<String, Tensor>> {
        let state = self.state.as_ref().ok_or(AdError::BackwardBeforeForward)?;
        let loss_val = &state.values[loss.node][loss.slot];
        if !loss_val.is_scalar() {
            return Err(AdError::NonScalarLoss(loss_val.shape().to_vec()));
        }

        let mut grads: Vec<Vec<Option<Tensor>>> = self
            .nodes
            .iter()
            .map(|n| vec![None; n.op.num_outputs()])
            .collect();
        grads[loss.node][loss.slot] = Some(Tensor::scalar(seed));

        for id in (0..self.nodes.len()).rev() {
            let node = &self.nodes[id];
            let n_out = node.op.num_outputs();
            let any_grad = (0..n_out).any(|s| grads[id][s].is_some());
            if !any_grad || node.inputs.is_empty() {
                continue;
            }
            // Materialize zero cotangents for unused output slots of
            // multi-output nodes so custom backward sees a full set.
            let out_cts: Vec<Tensor> = (0..n_out)
                .map(|s| match &grads[id][s] {
                    Some(g) => g.clone(),
                    None => Tensor::zeros_like(&state.values[id][s]),
                })
                .collect();
            let in_vals: Vec<&Tensor> = node
                .inputs
                .iter()
                .map(|r| &state.values[r.node][r.slot])
                .collect();
            let out_vals = &state.values[id];

            let in_cts: Vec<Tensor> = match &node.op {
                OpKind::Input(_) | OpKind::Param(_) | OpKind::Const(_) => unreachable!(),
                OpKind::Affine => affine_bwd(in_vals[0], in_vals[1], &out_cts[0]),
                OpKind::Lincomb { coeffs, .. } => coeffs
                    .iter()
                    .map(|c| {
                        let data = out_cts[0].data().iter().map(|g| c * g).collect();
                        Tensor::new(out_cts[0].shape().to_vec(), data)
                    })
                    .collect(),
                OpKind::Tanh => vec![zip_bwd(&out_vals[0], &out_cts[0], |y, g| g * (1.0 - y * y))],
                OpKind::Relu => vec![zip_in_bwd(in_vals[0], &out_cts[0], |x, g| {
                    if x > 0.0 {
                        g
                    } else {
                        0.0
                    }
                })],
                OpKind::Exp => vec![zip_bwd(&out_vals[0], &out_cts[0], |y, g| g * y)],
                OpKind::Log => vec![zip_in_bwd(in_vals[0], &out_cts[0], |x, g| g / x)],
                OpKind::Abs => vec![zip_in_bwd(in_vals[0], &out_cts[0], |x, g| {
                    if x > 0.0 {
                        g
                    } else if x < 0.0 {
                        -g
                    } else {
                        0.0
                    }
                })],
                OpKind::SignSmooth { eps } => {
                    let e2 = eps * eps;
                    vec![zip_in_bwd(in_vals[0], &out_cts[0], move |x, g| {
                        g * e2 / (x * x + e2).powf(1.5)
                    })]
                }
                OpKind::Softmax => vec![softmax_bwd(&out_vals[0], &out_cts[0])],
                OpKind::Concat => {
                    let mut cts = Vec::with_capacity(in_vals.len());
                    let mut off = 0;
                    for x in &in_vals {
                        let ct = Tensor::new(
                            x.shape().to_vec(),
                            out_cts[0].data()[off..off + x.len()].to_vec(),
                        );
                        off += x.len();
                        cts.push(ct);
                    }
                    cts
                }
                OpKind::Slice { start, len } => {
                    let mut data = vec![0.0; in_vals[0].len()];
                    data[*start..start + len].copy_from_slice(out_cts[0].data());
                    vec![Tensor::new(in_vals[0].shape().to_vec(), data)]
                }
                OpKind::Mean => {
                    let g = out_cts[0].value() / in_vals[0].len() as f64;
                    vec![Tensor::new(in_vals[0].shape().to_vec(), vec![g; in_vals[0].len()])]
                }
                OpKind::Sum => {
                    let g = out_cts[0].value();
                    vec![Tensor::new(in_vals[0].shape().to_vec(), vec![g; in_vals[0].len()])]
                }
                OpKind::Mul => {
                    let ga = zip2(&out_cts[0], in_vals[1], |g, b| g * b);
                    let gb = zip2(&out_cts[0], in_vals[0], |g, a| g * a);
                    vec![ga, gb]
                }
                OpKind::Attention => attention_bwd(in_vals[0], in_vals[1], in_vals[2], &out_cts[0]),
                OpKind::Custom(op) => op
                    .backward(&in_vals, out_vals, &out_cts)
                    .map_err(|msg| AdError::Custom { op: op.name().to_string(), msg })?,
            };

            debug_assert_eq!(in_cts.len(), node.inputs.len());
            for (r, ct) in node.inputs.clone().iter().zip(in_cts) {
                accumulate(&mut grads[r.node][r.slot], ct);
            }
        }

        let mut out = BTreeMap::new();
        for (name, (node_id, value)) in &self.params {
            let g = match grads[*node_id][0].take() {
                Some(g) => g,
                None => Tensor::zeros_like(value),
            };
            out.insert(name.clone(), g);
        }
        Ok(out)
    }
}

fn accumulate(slot: &mut Option<Tensor>, ct: Tensor) {
    match slot {
        Some(acc) => {
            for (a, c) in acc.data_mut().iter_mut().zip(ct.data()) {
                *a += c;
            }
        }
        None => *slot = Some(ct),
    }
}

fn map_fwd(x: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::new(x.shape().to_vec(), x.data().iter().map(|&v| f(v)).collect())
}

fn zip_bwd(y: &Tensor, g: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor::new(
        y.shape().to_vec(),
        y.data().iter().zip(g.data()).map(|(&a, &b)| f(a, b)).collect(),
    )
}

fn zip_in_bwd(x: &Tensor, g: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor::new(
        x.shape().to_vec(),
        x.data().iter().zip(g.data()).map(|(&a, &b)| f(a, b)).collect(),
    )
}

fn zip2(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor::new(
        a.shape().to_vec(),
        a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect(),
    )
}

fn affine_fwd(id: usize, x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (r, n) = x.rows_cols();
    let (wn, m) = w.rows_cols();
    if n != wn || b.len() != m {
        return Err(AdError::Shape {
            node: id,
            msg: format!(
                "affine: x {:?}, w {:?}, b {:?}",
                x.shape(),
                w.shape(),
                b.shape()
            ),
        });
    }
    let mut out = vec![0.0; r * m];
    for i in 0..r {
        let xrow = &x.data()[i * n..(i + 1) * n];
        let orow = &mut out[i * m..(i + 1) * m];
        orow.copy_from_slice(b.data());
        for (k, &xv) in xrow.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let wrow = &w.data()[k * m..(k + 1) * m];
            for (o, &wv) in orow.iter_mut().zip(wrow) {
                *o += xv * wv;
            }
        }
    }
    Ok(if x.shape().len() == 1 {
        Tensor::vector(out)
    } else {
        Tensor::matrix(r, m, out)
    })
}

fn affine_bwd(x: &Tensor, w: &Tensor, g: &Tensor) -> Vec<Tensor> {
    let (r, n) = x.rows_cols();
    let (_, m) = w.rows_cols();
    // dx = g W^T
    let mut dx = vec![0.0; r * n];
    for i in 0..r {
        let grow = &g.data()[i * m..(i + 1) * m];
        let dxrow = &mut dx[i * n..(i + 1) * n];
        for k in 0..n {
            let wrow = &w.data()[k * m..(k + 1) * m];
            let mut acc = 0.0;
            for (gv, wv) in grow.iter().zip(wrow) {
                acc += gv * wv;
            }
            dxrow[k] = acc;
        }
    }
    // dW = x^T g
    let mut dw = vec![0.0; n * m];
    for i in 0..r {
        let xrow = &x.data()[i * n..(i + 1) * n];
        let grow = &g.data()[i * m..(i + 1) * m];
        for (k, &xv) in xrow.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let dwrow = &mut dw[k * m..(k + 1) * m];
            for (d, &gv) in dwrow.iter_mut().zip(grow) {
                *d += xv * gv;
            }
        }
    }
    // db = column sums of g
    let mut db = vec![0.0; m];
    for i in 0..r {
        for (d, &gv) in db.iter_mut().zip(&g.data()[i * m..(i + 1) * m]) {
            *d += gv;
        }
    }
    vec![
        Tensor::new(x.shape().to_vec(), dx),
        Tensor::new(w.shape().to_vec(), dw),
        Tensor::vector(db),
    ]
}

fn lincomb_fwd(id: usize, coeffs: &[f64], base: Option<&Tensor>, xs: &[&Tensor]) -> Result<Tensor> {
    let shape = xs
        .first()
        .map(|t| t.shape().to_vec())
        .or_else(|| base.map(|b| b.shape().to_vec()))
        .ok_or_else(|| AdError::Shape { node: id, msg: "lincomb with no terms".into() })?;
    let len: usize = shape.iter().product();
    let mut out = match base {
        Some(b) => b.data().to_vec(),
        None => vec![0.0; len],
    };
    for (c, x) in coeffs.iter().zip(xs) {
        if x.shape() != shape.as_slice() {
            return Err(AdError::Shape {
                node: id,
                msg: format!("lincomb shapes {:?} vs {:?}", x.shape(), shape),
            });
        }
        for (o, v) in out.iter_mut().zip(x.data()) {
            *o += c * v;
        }
    }
    Ok(Tensor::new(shape, out))
}

fn softmax_fwd(x: &Tensor) -> Tensor {
    let max = x.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.data().iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Tensor::new(x.shape().to_vec(), exps.iter().map(|e| e / sum).collect())
}

fn softmax_bwd(y: &Tensor, g: &Tensor) -> Tensor {
    let dot: f64 = y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
    Tensor::new(
        y.shape().to_vec(),
        y.data()
            .iter()
            .zip(g.data())
            .map(|(&yi, &gi)| yi * (gi - dot))
            .collect(),
    )
}

fn attention_fwd(id: usize, q: &Tensor, k: &Tensor, v: &Tensor) -> Result<Tensor> {
    let (j, d) = q.rows_cols();
    if k.rows_cols() != (j, d) || v.rows_cols() != (j, d) {
        return Err(AdError::Shape {
            node: id,
            msg: format!("attention: q {:?}, k {:?}, v {:?}", q.shape(), k.shape(), v.shape()),
        });
    }
    let scale = 1.0 / (d as f64).sqrt();
    let mut out = vec![0.0; j * d];
    for i in 0..j {
        let qrow = &q.data()[i * d..(i + 1) * d];
        // scores row, softmaxed in place
        let mut scores = vec![0.0; j];
        for (jj, s) in scores.iter_mut().enumerate() {
            let krow = &k.data()[jj * d..(jj + 1) * d];
            *s = qrow.iter().zip(krow).map(|(a, b)| a * b).sum::<f64>() * scale;
        }
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for s in scores.iter_mut() {
            *s = (*s - max).exp();
            sum += *s;
        }
        let orow = &mut out[i * d..(i + 1) * d];
        for (jj, s) in scores.iter().enumerate() {
            let a = s / sum;
            if a == 0.0 {
                continue;
            }
            let vrow = &v.data()[jj * d..(jj + 1) * d];
            for (o, &vv) in orow.iter_mut().zip(vrow) {
                *o += a * vv;
            }
        }
    }
    Ok(Tensor::matrix(j, d, out))
}

fn attention_bwd(q: &Tensor, k: &Tensor, v: &Tensor, g: &Tensor) -> Vec<Tensor> {
    let (j, d) = q.rows_cols();
    let scale = 1.0 / (d as f64).sqrt();
    let mut dq = vec![0.0; j * d];
    let mut dk = vec![0.0; j * d];
    let mut dv = vec![0.0; j * d];
    for i in 0..j {
        let qrow = &q.data()[i * d..(i + 1) * d];
        let grow = &g.data()[i * d..(i + 1) * d];
        // recompute attention row
        let mut a = vec![0.0; j];
        for (jj, s) in a.iter_mut().enumerate() {
            let krow = &k.data()[jj * d..(jj + 1) * d];
            *s = qrow.iter().zip(krow).map(|(x, y)| x * y).sum::<f64>() * scale;
        }
        let max = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for s in a.iter_mut() {
            *s = (*s - max).exp();
            sum += *s;
        }
        for s in a.iter_mut() {
            *s /= sum;
        }
        // da_jj = <grow, v_jj>; dv_jj += a_jj * grow
        let mut da = vec![0.0; j];
        for jj in 0..j {
            let vrow = &v.data()[jj * d..(jj + 1) * d];
            da[jj] = grow.iter().zip(vrow).map(|(x, y)| x * y).sum::<f64>();
            let dvrow = &mut dv[jj * d..(jj + 1) * d];
            for (dd, &gv) in dvrow.iter_mut().zip(grow) {
                *dd += a[jj] * gv;
            }
        }
        // softmax backward: ds = a .* (da - <da, a>)
        let dot: f64 = da.iter().zip(&a).map(|(x, y)| x * y).sum();
        for jj in 0..j {
            let ds = a[jj] * (da[jj] - dot) * scale;
            if ds == 0.0 {
                continue;
            }
            let krow = &k.data()[jj * d..(jj + 1) * d];
            let dqrow = &mut dq[i * d..(i + 1) * d];
            for (dd, &kv) in dqrow.iter_mut().zip(krow) {
                *dd += ds * kv;
            }
            let dkrow = &mut dk[jj * d..(jj + 1) * d];
            for (dd, &qv) in dkrow.iter_mut().zip(qrow) {
                *dd += ds * qv;
            }
        }
    }
    vec![
        Tensor::new(q.shape().to_vec(), dq),
        Tensor::new(k.shape().to_vec(), dk),
        Tensor::new(v.shape().to_vec(), dv),
    ]
}
