//! Tree neural networks.
//!
//! Every operator of the signature owns a small network: arity-0 operators a
//! learnable embedding vector, arity-`a` operators one affine layer from
//! `a * dim` to `dim` followed by tanh, literal operators nothing (their
//! embedding is the literal vector itself). A term's embedding is computed
//! bottom-up; named heads (two tanh layers each) read the root embedding.
//! Head outputs are mapped from `[-1, 1]` to `[0, 1]` by `y -> (y + 1) / 2`.
//!
//! All parameters live in one flat `Vec<f64>`; a [`Gradient`] is a vector of
//! the same length, which keeps descent steps, finite differences and
//! checkpoints simple.

mod checkpoint;
mod train;

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::term::{OpId, Signature, Term};

pub use checkpoint::CheckpointError;
pub use train::{batch_loss, train, TrainSchedule};

pub const POLICY_HEAD: &str = "policy";
pub const VALUE_HEAD: &str = "value";

#[derive(Debug, Error, PartialEq)]
pub enum TnnError {
    #[error("operator id {0} is not in the model signature")]
    UnknownOperator(u32),
    #[error("operator `{name}` has arity {expected}, term node has {found} arguments")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("literal `{name}` has length {found}, embedding dimension is {dim}")]
    LiteralDim { name: String, found: usize, dim: usize },
    #[error("head `{0}` not found")]
    MissingHead(String),
    #[error("target for head `{head}` has length {found}, head outputs {expected}")]
    TargetDim {
        head: String,
        expected: usize,
        found: usize,
    },
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid training schedule: {0}")]
    Schedule(String),
}

/// Position of one affine layer inside the flat parameter vector.
/// Weights are stored row-major, `out` rows of `inp` columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub inp: usize,
    pub out: usize,
    w_off: usize,
    b_off: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum OpParams {
    Embedding { off: usize },
    Net(LayerShape),
    Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Head {
    name: String,
    layers: Vec<LayerShape>,
}

/// Borrowed view of one layer's weights.
#[derive(Debug, Clone, Copy)]
pub struct LayerView<'a> {
    pub inp: usize,
    pub out: usize,
    /// Row-major `out x inp`.
    pub weights: &'a [f64],
    pub bias: &'a [f64],
}

/// Borrowed view of an operator's parameters.
#[derive(Debug, Clone, Copy)]
pub enum OpView<'a> {
    Embedding(&'a [f64]),
    Net(LayerView<'a>),
    Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TnnModel {
    dim: usize,
    sig: Arc<Signature>,
    ops: Vec<OpParams>,
    heads: Vec<Head>,
    params: Vec<f64>,
}

/// Gradient of the loss with respect to [`TnnModel::params`].
pub type Gradient = Vec<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub input: Term,
    pub policy: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub policy: Vec<f64>,
    pub value: f64,
}

struct LayoutBuilder {
    next: usize,
}

impl LayoutBuilder {
    fn layer(&mut self, inp: usize, out: usize) -> LayerShape {
        let w_off = self.next;
        let b_off = w_off + inp * out;
        self.next = b_off + out;
        LayerShape {
            inp,
            out,
            w_off,
            b_off,
        }
    }

    fn vector(&mut self, len: usize) -> usize {
        let off = self.next;
        self.next += len;
        off
    }
}

impl TnnModel {
    /// A model with every parameter set to zero.
    pub fn zeros(sig: Arc<Signature>, dim: usize, heads: &[(&str, usize)]) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        let mut b = LayoutBuilder { next: 0 };
        let ops = sig
            .ops()
            .map(|(_, op)| {
                if op.literal {
                    OpParams::Literal
                } else if op.arity == 0 {
                    OpParams::Embedding { off: b.vector(dim) }
                } else {
                    OpParams::Net(b.layer(op.arity * dim, dim))
                }
            })
            .collect();
        let heads = heads
            .iter()
            .map(|&(name, out)| Head {
                name: name.to_string(),
                layers: vec![b.layer(dim, dim), b.layer(dim, out)],
            })
            .collect();
        TnnModel {
            dim,
            sig,
            ops,
            heads,
            params: vec![0.0; b.next],
        }
    }

    /// Uniform initialisation in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`;
    /// embedding vectors use fan-in 1.
    pub fn random<R: Rng + ?Sized>(
        sig: Arc<Signature>,
        dim: usize,
        heads: &[(&str, usize)],
        rng: &mut R,
    ) -> Self {
        let mut m = Self::zeros(sig, dim, heads);
        let mut shapes: Vec<LayerShape> = Vec::new();
        for op in &m.ops {
            match *op {
                OpParams::Embedding { off } => {
                    for p in &mut m.params[off..off + dim] {
                        *p = rng.random_range(-1.0..=1.0);
                    }
                }
                OpParams::Net(shape) => shapes.push(shape),
                OpParams::Literal => {}
            }
        }
        shapes.extend(m.heads.iter().flat_map(|h| h.layers.iter().copied()));
        for s in shapes {
            let bound = 1.0 / (s.inp as f64).sqrt();
            for p in &mut m.params[s.w_off..s.b_off + s.out] {
                *p = rng.random_range(-bound..=bound);
            }
        }
        m
    }

    /// Policy head with `moves` outputs and a one-output value head.
    pub fn policy_value<R: Rng + ?Sized>(
        sig: Arc<Signature>,
        dim: usize,
        moves: usize,
        rng: &mut R,
    ) -> Self {
        Self::random(sig, dim, &[(POLICY_HEAD, moves), (VALUE_HEAD, 1)], rng)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn signature(&self) -> &Arc<Signature> {
        &self.sig
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn head_names(&self) -> impl Iterator<Item = &str> {
        self.heads.iter().map(|h| h.name.as_str())
    }

    pub fn head_output_dim(&self, name: &str) -> Option<usize> {
        self.head(name).ok().map(|h| h.layers.last().unwrap().out)
    }

    fn head(&self, name: &str) -> Result<&Head, TnnError> {
        self.heads
            .iter()
            .find(|h| h.name == name)
            .ok_or_else(|| TnnError::MissingHead(name.to_string()))
    }

    fn view(&self, s: LayerShape) -> LayerView<'_> {
        LayerView {
            inp: s.inp,
            out: s.out,
            weights: &self.params[s.w_off..s.b_off],
            bias: &self.params[s.b_off..s.b_off + s.out],
        }
    }

    pub fn op_view(&self, op: OpId) -> Option<OpView<'_>> {
        Some(match *self.ops.get(op.index())? {
            OpParams::Embedding { off } => OpView::Embedding(&self.params[off..off + self.dim]),
            OpParams::Net(s) => OpView::Net(self.view(s)),
            OpParams::Literal => OpView::Literal,
        })
    }

    pub fn head_layers(&self, name: &str) -> Option<Vec<LayerView<'_>>> {
        let h = self.head(name).ok()?;
        Some(h.layers.iter().map(|&s| self.view(s)).collect())
    }

    /// Parameter index range belonging to the named head.
    pub fn head_param_range(&self, name: &str) -> Option<std::ops::Range<usize>> {
        let h = self.head(name).ok()?;
        let first = h.layers.first()?.w_off;
        let last = h.layers.last()?;
        Some(first..last.b_off + last.out)
    }

    /// Bottom-up embedding of `t`.
    pub fn embed(&self, t: &Term) -> Result<Vec<f64>, TnnError> {
        let fwd = self.forward_dag(t)?;
        Ok(fwd.root_embedding(self.dim).to_vec())
    }

    /// Applies every head to the embedding of `t`; outputs are in `[0, 1]`.
    pub fn outputs(&self, t: &Term) -> Result<Vec<Vec<f64>>, TnnError> {
        let fwd = self.forward_dag(t)?;
        let root = fwd.root_embedding(self.dim);
        Ok(self
            .heads
            .iter()
            .map(|h| {
                let acts = self.head_forward(h, root);
                acts.last().unwrap().iter().map(|y| (y + 1.0) / 2.0).collect()
            })
            .collect())
    }

    pub fn head_output(&self, t: &Term, head: &str) -> Result<Vec<f64>, TnnError> {
        let h = self.head(head)?;
        let fwd = self.forward_dag(t)?;
        let acts = self.head_forward(h, fwd.root_embedding(self.dim));
        Ok(acts.last().unwrap().iter().map(|y| (y + 1.0) / 2.0).collect())
    }

    /// Policy and value for `t`. The policy is not renormalised.
    pub fn infer(&self, t: &Term) -> Result<Inference, TnnError> {
        let p = self.head(POLICY_HEAD)?;
        let v = self.head(VALUE_HEAD)?;
        let fwd = self.forward_dag(t)?;
        let root = fwd.root_embedding(self.dim);
        let policy = self
            .head_forward(p, root)
            .pop()
            .unwrap()
            .into_iter()
            .map(|y| (y + 1.0) / 2.0)
            .collect();
        let value = (self.head_forward(v, root).pop().unwrap()[0] + 1.0) / 2.0;
        Ok(Inference { policy, value })
    }

    /// Per-head mean squared error, summed over the policy and value heads.
    pub fn loss(&self, ex: &TrainExample) -> Result<f64, TnnError> {
        let out = self.infer(&ex.input)?;
        self.check_targets(ex)?;
        Ok(mse(&out.policy, &ex.policy) + mse(&[out.value], &[ex.value]))
    }

    fn check_targets(&self, ex: &TrainExample) -> Result<(), TnnError> {
        let expected = self.head_output_dim(POLICY_HEAD).unwrap_or(0);
        if ex.policy.len() != expected {
            return Err(TnnError::TargetDim {
                head: POLICY_HEAD.to_string(),
                expected,
                found: ex.policy.len(),
            });
        }
        Ok(())
    }

    /// Exact gradient of [`TnnModel::loss`] with respect to every parameter.
    pub fn gradient(&self, ex: &TrainExample) -> Result<Gradient, TnnError> {
        let mut g = vec![0.0; self.params.len()];
        self.accumulate_gradient(ex, &mut g)?;
        Ok(g)
    }

    /// Adds the gradient of the loss on `ex` into `grad`; returns the loss.
    pub fn accumulate_gradient(&self, ex: &TrainExample, grad: &mut [f64]) -> Result<f64, TnnError> {
        self.check_targets(ex)?;
        let dim = self.dim;
        let fwd = self.forward_dag(&ex.input)?;
        let root_idx = fwd.nodes.len() - 1;
        let mut d_emb = vec![0.0; fwd.nodes.len() * dim];
        let mut loss = 0.0;

        for (head_name, target) in [
            (POLICY_HEAD, ex.policy.as_slice()),
            (VALUE_HEAD, std::slice::from_ref(&ex.value)),
        ] {
            let h = self.head(head_name)?;
            let root = fwd.root_embedding(dim);
            let acts = self.head_forward(h, root);
            let y = acts.last().unwrap();
            let n = y.len() as f64;
            // o = (y + 1) / 2, L = sum (o - t)^2 / n  =>  dL/dy = (o - t) / n
            let mut delta: Vec<f64> = y
                .iter()
                .zip(target)
                .map(|(&yi, &ti)| {
                    let o = (yi + 1.0) / 2.0;
                    loss += (o - ti) * (o - ti) / n;
                    (o - ti) / n
                })
                .collect();
            for (li, &shape) in h.layers.iter().enumerate().rev() {
                let out = &acts[li + 1];
                let input: &[f64] = if li == 0 { root } else { &acts[li] };
                for (d, o) in delta.iter_mut().zip(out) {
                    *d *= 1.0 - o * o;
                }
                let d_in = self.layer_backward(shape, input, &delta, grad);
                if li == 0 {
                    for (acc, v) in d_emb[root_idx * dim..].iter_mut().zip(&d_in) {
                        *acc += v;
                    }
                } else {
                    delta = d_in;
                }
            }
        }

        let mut input = Vec::new();
        for (i, node) in fwd.nodes.iter().enumerate().rev() {
            let de = &d_emb[i * dim..(i + 1) * dim];
            match self.ops[node.op.index()] {
                OpParams::Embedding { off } => {
                    for (g, v) in grad[off..off + dim].iter_mut().zip(de) {
                        *g += v;
                    }
                }
                OpParams::Literal => {}
                OpParams::Net(shape) => {
                    let out = &fwd.emb[i * dim..(i + 1) * dim];
                    let delta: Vec<f64> = de
                        .iter()
                        .zip(out)
                        .map(|(d, o)| d * (1.0 - o * o))
                        .collect();
                    fwd.gather_input(node, dim, &mut input);
                    let d_in = self.layer_backward(shape, &input, &delta, grad);
                    for (k, &c) in node.children.iter().enumerate() {
                        for (acc, v) in d_emb[c * dim..(c + 1) * dim]
                            .iter_mut()
                            .zip(&d_in[k * dim..(k + 1) * dim])
                        {
                            *acc += v;
                        }
                    }
                }
            }
        }
        Ok(loss)
    }

    /// Accumulates weight/bias gradients for `delta` (gradient wrt the
    /// pre-activation) and returns the gradient wrt the layer input.
    fn layer_backward(&self, s: LayerShape, input: &[f64], delta: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let w = &self.params[s.w_off..s.b_off];
        let mut d_in = vec![0.0; s.inp];
        for (r, &d) in delta.iter().enumerate() {
            let row = r * s.inp;
            let grow = &mut grad[s.w_off + row..s.w_off + row + s.inp];
            for ((g, x), (di, wv)) in grow
                .iter_mut()
                .zip(input)
                .zip(d_in.iter_mut().zip(&w[row..row + s.inp]))
            {
                *g += d * x;
                *di += d * wv;
            }
            grad[s.b_off + r] += d;
        }
        d_in
    }

    fn layer_forward(&self, s: LayerShape, input: &[f64], out: &mut [f64]) {
        let w = &self.params[s.w_off..s.b_off];
        let b = &self.params[s.b_off..s.b_off + s.out];
        for (r, o) in out.iter_mut().enumerate() {
            let row = &w[r * s.inp..(r + 1) * s.inp];
            let z: f64 = row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>() + b[r];
            *o = z.tanh();
        }
    }

    /// Activations of every head layer, starting with the input embedding.
    fn head_forward(&self, h: &Head, root: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![root.to_vec()];
        for &s in &h.layers {
            let mut out = vec![0.0; s.out];
            self.layer_forward(s, acts.last().unwrap(), &mut out);
            acts.push(out);
        }
        acts
    }

    fn forward_dag(&self, t: &Term) -> Result<Forward, TnnError> {
        let dag = Dag::build(t);
        let dim = self.dim;
        let mut emb = vec![0.0; dag.nodes.len() * dim];
        let mut input = Vec::new();
        let mut fwd = Forward {
            nodes: dag.nodes,
            emb: Vec::new(),
        };
        for i in 0..fwd.nodes.len() {
            let node = &fwd.nodes[i];
            let op = self
                .sig
                .get(node.op)
                .ok_or(TnnError::UnknownOperator(node.op.0))?;
            if !op.literal && op.arity != node.children.len() {
                return Err(TnnError::Arity {
                    name: op.name.clone(),
                    expected: op.arity,
                    found: node.children.len(),
                });
            }
            let (done, rest) = emb.split_at_mut(i * dim);
            let out = &mut rest[..dim];
            match (self.ops[node.op.index()], &node.literal) {
                (OpParams::Embedding { off }, _) => out.copy_from_slice(&self.params[off..off + dim]),
                (OpParams::Literal, Some(values)) => {
                    if values.len() != dim {
                        return Err(TnnError::LiteralDim {
                            name: op.name.clone(),
                            found: values.len(),
                            dim,
                        });
                    }
                    for (o, &v) in out.iter_mut().zip(values.iter()) {
                        *o = v as f64;
                    }
                }
                (OpParams::Literal, None) => {
                    return Err(TnnError::LiteralDim {
                        name: op.name.clone(),
                        found: 0,
                        dim,
                    })
                }
                (OpParams::Net(shape), _) => {
                    input.clear();
                    for &c in &node.children {
                        input.extend_from_slice(&done[c * dim..(c + 1) * dim]);
                    }
                    self.layer_forward(shape, &input, out);
                }
            }
        }
        fwd.emb = emb;
        Ok(fwd)
    }
}

fn mse(out: &[f64], target: &[f64]) -> f64 {
    let n = out.len() as f64;
    out.iter()
        .zip(target)
        .map(|(o, t)| (o - t) * (o - t))
        .sum::<f64>()
        / n
}

struct DagNode {
    op: OpId,
    children: Vec<usize>,
    literal: Option<Arc<[i8]>>,
}

/// Hash-consed term: each distinct subterm appears once, children before
/// parents, root last.
struct Dag {
    nodes: Vec<DagNode>,
}

#[derive(PartialEq, Eq, Hash)]
enum DagKey {
    App(OpId, Vec<usize>),
    Lit(OpId, Arc<[i8]>),
}

impl Dag {
    fn build(t: &Term) -> Dag {
        let mut dag = Dag { nodes: Vec::new() };
        let mut seen = HashMap::new();
        dag.visit(t, &mut seen);
        dag
    }

    fn visit(&mut self, t: &Term, seen: &mut HashMap<DagKey, usize>) -> usize {
        let (key, literal) = match t {
            Term::App { op, args } => {
                let children: Vec<usize> = args.iter().map(|a| self.visit(a, seen)).collect();
                (DagKey::App(*op, children), None)
            }
            Term::Lit { op, values } => (DagKey::Lit(*op, values.clone()), Some(values.clone())),
        };
        if let Some(&i) = seen.get(&key) {
            return i;
        }
        let children = match &key {
            DagKey::App(_, c) => c.clone(),
            DagKey::Lit(..) => Vec::new(),
        };
        let idx = self.nodes.len();
        self.nodes.push(DagNode {
            op: t.op(),
            children,
            literal,
        });
        seen.insert(key, idx);
        idx
    }
}

struct Forward {
    nodes: Vec<DagNode>,
    emb: Vec<f64>,
}

impl Forward {
    fn root_embedding(&self, dim: usize) -> &[f64] {
        &self.emb[self.emb.len() - dim..]
    }

    fn gather_input(&self, node: &DagNode, dim: usize, out: &mut Vec<f64>) {
        out.clear();
        for &c in &node.children {
            out.extend_from_slice(&self.emb[c * dim..(c + 1) * dim]);
        }
    }
}
