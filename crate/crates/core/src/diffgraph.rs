//! Recorded computation graph with reverse-mode differentiation.
//!
//! Every operation appends a node holding its forward value. Adjoints are
//! themselves computed with recorded operations, so the output of [`Graph::grad`]
//! is an ordinary part of the graph and can be differentiated again. This is
//! how PDE residuals (which contain input derivatives of the network) are
//! differentiated with respect to the network parameters.
//!
//! Nodes are numbered in recording order, so parents always precede their
//! children and a reverse sweep over ids is a valid topological order.
//! Adjoint contributions are accumulated in that fixed order, which keeps
//! results bit-reproducible.

use crate::error::{shape_err, Error, Result};
use crate::tensor::{gemm, transpose, Tensor};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Value(usize);

impl Value {
    pub fn id(self) -> usize {
        self.0
    }
}

/// Operation tags understood by [`Graph::record`].
///
/// Elementwise binary ops require identical shapes; broadcasting is explicit
/// through the `Broadcast*` tags so that every VJP stays inside this set.
#[derive(Clone, Debug, PartialEq)]
pub enum OpTag {
    Add,
    Sub,
    Mul,
    Neg,
    Scale(f64),
    Offset(f64),
    MatMul,
    Transpose,
    Sin,
    Cos,
    Tanh,
    Exp,
    Sigmoid,
    Recip,
    Sqrt,
    Powi(i32),
    Asin,
    Acos,
    /// Sum of all entries, rank-0 result.
    Sum,
    BroadcastScalar(Vec<usize>),
    /// `R × C -> 1 × C`
    SumRows,
    /// `1 × C -> R × C`
    BroadcastRows(usize),
    /// `R × C -> R × 1`
    SumCols,
    /// `R × 1 -> R × C`
    BroadcastCols(usize),
    ConcatCols,
    SliceCols {
        start: usize,
        len: usize,
    },
    /// Embeds an `R × k` block into zeros of width `total` at column `start`.
    PadCols {
        start: usize,
        total: usize,
    },
    Reshape(Vec<usize>),
}

impl OpTag {
    pub fn name(&self) -> &'static str {
        match self {
            OpTag::Add => "add",
            OpTag::Sub => "sub",
            OpTag::Mul => "mul",
            OpTag::Neg => "neg",
            OpTag::Scale(_) => "scale",
            OpTag::Offset(_) => "offset",
            OpTag::MatMul => "matmul",
            OpTag::Transpose => "transpose",
            OpTag::Sin => "sin",
            OpTag::Cos => "cos",
            OpTag::Tanh => "tanh",
            OpTag::Exp => "exp",
            OpTag::Sigmoid => "sigmoid",
            OpTag::Recip => "recip",
            OpTag::Sqrt => "sqrt",
            OpTag::Powi(_) => "powi",
            OpTag::Asin => "asin",
            OpTag::Acos => "acos",
            OpTag::Sum => "sum",
            OpTag::BroadcastScalar(_) => "broadcast_scalar",
            OpTag::SumRows => "sum_rows",
            OpTag::BroadcastRows(_) => "broadcast_rows",
            OpTag::SumCols => "sum_cols",
            OpTag::BroadcastCols(_) => "broadcast_cols",
            OpTag::ConcatCols => "concat_cols",
            OpTag::SliceCols { .. } => "slice_cols",
            OpTag::PadCols { .. } => "pad_cols",
            OpTag::Reshape(_) => "reshape",
        }
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Leaf,
    Const,
    Op(OpTag),
}

#[derive(Clone, Debug)]
struct Node {
    kind: Kind,
    parents: Vec<Value>,
    value: Tensor,
}

/// Adjoints for the handles requested from [`Graph::backward`], in request order.
#[derive(Clone, Debug, Default)]
pub struct GradientMap {
    entries: Vec<(Value, Tensor)>,
}

impl GradientMap {
    pub fn get(&self, v: Value) -> Option<&Tensor> {
        self.entries.iter().find(|(k, _)| *k == v).map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Value, Tensor)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Concatenates all adjoints into one flat vector, request order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.entries.iter().map(|(_, t)| t.numel()).sum());
        for (_, t) in &self.entries {
            out.extend_from_slice(t.data());
        }
        out
    }
}

/// A single-owner computation graph. Graphs are cheap to create; build one per
/// loss evaluation and drop it afterwards.
#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every node recorded at or after `len`.
    pub(crate) fn truncate(&mut self, len: usize) {
        self.nodes.truncate(len);
    }

    pub fn value(&self, v: Value) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Value) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn is_leaf(&self, v: Value) -> bool {
        matches!(self.nodes[v.0].kind, Kind::Leaf)
    }

    /// A differentiable input.
    pub fn leaf(&mut self, t: Tensor) -> Value {
        self.push(Kind::Leaf, Vec::new(), t)
    }

    /// A value that is never differentiated through.
    pub fn constant(&mut self, t: Tensor) -> Value {
        self.push(Kind::Const, Vec::new(), t)
    }

    pub fn scalar(&mut self, v: f64) -> Value {
        self.constant(Tensor::scalar(v))
    }

    fn push(&mut self, kind: Kind, parents: Vec<Value>, value: Tensor) -> Value {
        self.nodes.push(Node {
            kind,
            parents,
            value,
        });
        Value(self.nodes.len() - 1)
    }

    /// Records `op` applied to `inputs` and returns the new node.
    pub fn record(&mut self, op: OpTag, inputs: &[Value]) -> Result<Value> {
        let value = self.forward(&op, inputs)?;
        if !value.is_finite() {
            return Err(Error::NonFinite { op: op.name() });
        }
        Ok(self.push(Kind::Op(op), inputs.to_vec(), value))
    }

    fn forward(&self, op: &OpTag, inputs: &[Value]) -> Result<Tensor> {
        let name = op.name();
        let arity = match op {
            OpTag::Add | OpTag::Sub | OpTag::Mul | OpTag::MatMul => 2,
            OpTag::ConcatCols => inputs.len().max(1),
            _ => 1,
        };
        if inputs.len() != arity {
            return Err(shape_err(
                name,
                format!("expected {arity} inputs, got {}", inputs.len()),
            ));
        }
        let a = &self.nodes[inputs[0].0].value;
        let out = match op {
            OpTag::Add | OpTag::Sub | OpTag::Mul => {
                let b = &self.nodes[inputs[1].0].value;
                if a.shape() != b.shape() {
                    return Err(shape_err(
                        name,
                        format!("{:?} vs {:?}", a.shape(), b.shape()),
                    ));
                }
                let f: fn(f64, f64) -> f64 = match op {
                    OpTag::Add => |x, y| x + y,
                    OpTag::Sub => |x, y| x - y,
                    _ => |x, y| x * y,
                };
                let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
                Tensor::from_parts(a.shape().to_vec(), data)
            }
            OpTag::Neg => map(a, |x| -x),
            OpTag::Scale(c) => {
                let c = *c;
                map(a, |x| c * x)
            }
            OpTag::Offset(c) => {
                let c = *c;
                map(a, |x| x + c)
            }
            OpTag::Sin => map(a, f64::sin),
            OpTag::Cos => map(a, f64::cos),
            OpTag::Tanh => map(a, f64::tanh),
            OpTag::Exp => map(a, f64::exp),
            OpTag::Sigmoid => map(a, |x| 1.0 / (1.0 + (-x).exp())),
            OpTag::Recip => map(a, |x| 1.0 / x),
            OpTag::Sqrt => map(a, f64::sqrt),
            OpTag::Powi(n) => {
                let n = *n;
                map(a, |x| x.powi(n))
            }
            OpTag::Asin => map(a, f64::asin),
            OpTag::Acos => map(a, f64::acos),
            OpTag::MatMul => {
                let b = &self.nodes[inputs[1].0].value;
                if a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows() {
                    return Err(shape_err(
                        name,
                        format!("{:?} x {:?}", a.shape(), b.shape()),
                    ));
                }
                let (m, k, n) = (a.rows(), a.cols(), b.cols());
                Tensor::from_parts(vec![m, n], gemm(m, k, n, a.data(), b.data()))
            }
            OpTag::Transpose => {
                let (r, c) = rank2(name, a)?;
                Tensor::from_parts(vec![c, r], transpose(r, c, a.data()))
            }
            OpTag::Sum => Tensor::scalar(a.data().iter().sum()),
            OpTag::BroadcastScalar(shape) => {
                if a.numel() != 1 {
                    return Err(shape_err(name, format!("input {:?} is not a scalar", a.shape())));
                }
                Tensor::full(shape, a.data()[0])
            }
            OpTag::SumRows => {
                let (r, c) = rank2(name, a)?;
                let mut out = vec![0.0; c];
                for row in a.data().chunks_exact(c.max(1)).take(r) {
                    for (o, v) in out.iter_mut().zip(row) {
                        *o += v;
                    }
                }
                Tensor::from_parts(vec![1, c], out)
            }
            OpTag::BroadcastRows(rows) => {
                let (r, c) = rank2(name, a)?;
                if r != 1 {
                    return Err(shape_err(name, format!("expected 1 x C, got {:?}", a.shape())));
                }
                let mut out = Vec::with_capacity(rows * c);
                for _ in 0..*rows {
                    out.extend_from_slice(a.data());
                }
                Tensor::from_parts(vec![*rows, c], out)
            }
            OpTag::SumCols => {
                let (r, c) = rank2(name, a)?;
                let out = if c == 0 {
                    vec![0.0; r]
                } else {
                    a.data().chunks_exact(c).map(|row| row.iter().sum()).collect()
                };
                Tensor::from_parts(vec![r, 1], out)
            }
            OpTag::BroadcastCols(cols) => {
                let (r, c) = rank2(name, a)?;
                if c != 1 {
                    return Err(shape_err(name, format!("expected R x 1, got {:?}", a.shape())));
                }
                let mut out = Vec::with_capacity(r * cols);
                for &v in a.data() {
                    out.extend(std::iter::repeat(v).take(*cols));
                }
                Tensor::from_parts(vec![r, *cols], out)
            }
            OpTag::ConcatCols => {
                let rows = rank2(name, a)?.0;
                let mut widths = Vec::with_capacity(inputs.len());
                for v in inputs {
                    let t = &self.nodes[v.0].value;
                    let (r, c) = rank2(name, t)?;
                    if r != rows {
                        return Err(shape_err(name, format!("row counts {rows} vs {r}")));
                    }
                    widths.push(c);
                }
                let total: usize = widths.iter().sum();
                let mut out = Vec::with_capacity(rows * total);
                for row in 0..rows {
                    for (v, &w) in inputs.iter().zip(&widths) {
                        let d = self.nodes[v.0].value.data();
                        out.extend_from_slice(&d[row * w..(row + 1) * w]);
                    }
                }
                Tensor::from_parts(vec![rows, total], out)
            }
            OpTag::SliceCols { start, len } => {
                let (r, c) = rank2(name, a)?;
                if start + len > c {
                    return Err(shape_err(name, format!("cols {start}..{} of {c}", start + len)));
                }
                let mut out = Vec::with_capacity(r * len);
                for row in a.data().chunks_exact(c) {
                    out.extend_from_slice(&row[*start..start + len]);
                }
                Tensor::from_parts(vec![r, *len], out)
            }
            OpTag::PadCols { start, total } => {
                let (r, c) = rank2(name, a)?;
                if start + c > *total {
                    return Err(shape_err(name, format!("block {c} at {start} exceeds {total}")));
                }
                let mut out = vec![0.0; r * total];
                for (i, row) in a.data().chunks_exact(c.max(1)).take(r).enumerate() {
                    out[i * total + start..i * total + start + c].copy_from_slice(row);
                }
                Tensor::from_parts(vec![r, *total], out)
            }
            OpTag::Reshape(shape) => a.reshape(shape)?,
        };
        Ok(out)
    }

    // ---- named operations ---------------------------------------------------

    pub fn add(&mut self, a: Value, b: Value) -> Result<Value> {
        self.record(OpTag::Add, &[a, b])
    }

    pub fn sub(&mut self, a: Value, b: Value) -> Result<Value> {
        self.record(OpTag::Sub, &[a, b])
    }

    pub fn mul(&mut self, a: Value, b: Value) -> Result<Value> {
        self.record(OpTag::Mul, &[a, b])
    }

    pub fn neg(&mut self, a: Value) -> Result<Value> {
        self.record(OpTag::Neg, &[a])
    }

    pub fn scale(&mut self, a: Value, c: f64) -> Result<Value> {
        self.record(OpTag::Scale(c), &[a])
    }

    pub fn offset(&mut self, a: Value, c: f64) -> Result<Value> {
        self.record(OpTag::Offset(c), &[a])
    }

    pub fn matmul(&mut self, a: Value, b: Value) -> Result<Value> {
        self.record(OpTag::MatMul, &[a, b])
    }

    pub fn transpose(&mut self, a: Value) -> Result<Value> {
        self.record(OpTag::Transpose, &[a])
    }

    pub fn sin(&mut self, a: Value) -> Result<Value> {
        self.record(OpTag::Sin, &[a])
    }

    pub fn cos(&mut self, a: Value) -> Result<Value> {
        self.record(OpTag::Cos, &[a])
    }

    pub fn tanh(&mut self, a: Value) -> Result<Value> {
        self.record(OpTag::Tanh, &[a])
    }

    pub fn exp(&mut self, a: Value) -> Result<Value> {
        self.record(OpTag::Exp, &[a])
    }

    pub fn sigmoid(&mut self, a: Value) -> Result<Value> {
        self.record(OpTag::Sigmoid, &[a])
    }

    pub fn recip(&mut self, a: Value) -> Result<Value> {
        self.record(OpTag::Recip, &[a])
    }

    pub fn sqrt(&mut self, a: Value) -> Result<Value> {
        self.record(OpTag::Sqrt, &[a])
    }

    pub fn powi(&mut self, a: Value, n: i32) -> Result<Value> {
        self.record(OpTag::Powi(n), &[a])
    }

    pub fn asin(&mut self, a: Value) -> Result<Value> {
        self.record(OpTag::Asin, &[a])
    }

    pub fn acos(&mut self, a: Value) -> Result<Value> {
        self.record(OpTag::Acos, &[a])
    }

    pub fn sum(&mut self, a: Value) -> Result<Value> {
        self.record(OpTag::Sum, &[a])
    }

    pub fn broadcast_scalar(&mut self, a: Value, shape: &[usize]) -> Result<Value> {
        self.record(OpTag::BroadcastScalar(shape.to_vec()), &[a])
    }

    pub fn sum_rows(&mut self, a: Value) -> Result<Value> {
        self.record(OpTag::SumRows, &[a])
    }

    pub fn broadcast_rows(&mut self, a: Value, rows: usize) -> Result<Value> {
        self.record(OpTag::BroadcastRows(rows), &[a])
    }

    pub fn sum_cols(&mut self, a: Value) -> Result<Value> {
        self.record(OpTag::SumCols, &[a])
    }

    pub fn broadcast_cols(&mut self, a: Value, cols: usize) -> Result<Value> {
        self.record(OpTag::BroadcastCols(cols), &[a])
    }

    pub fn concat_cols(&mut self, parts: &[Value]) -> Result<Value> {
        if parts.len() == 1 {
            return Ok(parts[0]);
        }
        self.record(OpTag::ConcatCols, parts)
    }

    pub fn slice_cols(&mut self, a: Value, start: usize, len: usize) -> Result<Value> {
        self.record(OpTag::SliceCols { start, len }, &[a])
    }

    pub fn col(&mut self, a: Value, j: usize) -> Result<Value> {
        self.slice_cols(a, j, 1)
    }

    pub fn pad_cols(&mut self, a: Value, start: usize, total: usize) -> Result<Value> {
        self.record(OpTag::PadCols { start, total }, &[a])
    }

    pub fn reshape(&mut self, a: Value, shape: &[usize]) -> Result<Value> {
        self.record(OpTag::Reshape(shape.to_vec()), &[a])
    }

    pub fn square(&mut self, a: Value) -> Result<Value> {
        self.mul(a, a)
    }

    pub fn mean(&mut self, a: Value) -> Result<Value> {
        let n = self.value(a).numel();
        if n == 0 {
            return Err(Error::Invalid("mean of an empty tensor".into()));
        }
        let s = self.sum(a)?;
        self.scale(s, 1.0 / n as f64)
    }

    /// Mean of squared entries.
    pub fn mse(&mut self, a: Value) -> Result<Value> {
        let sq = self.square(a)?;
        self.mean(sq)
    }

    /// `x · w + b` with `b` a `1 × out` row broadcast over the batch.
    pub fn linear(&mut self, x: Value, w: Value, b: Value) -> Result<Value> {
        let xw = self.matmul(x, w)?;
        let rows = self.value(xw).rows();
        let bb = self.broadcast_rows(b, rows)?;
        self.add(xw, bb)
    }

    /// Multiplies a tensor by a rank-0 node.
    pub fn mul_scalar(&mut self, a: Value, s: Value) -> Result<Value> {
        let shape = self.shape(a).to_vec();
        let sb = self.broadcast_scalar(s, &shape)?;
        self.mul(a, sb)
    }

    // ---- differentiation ------------------------------------------------------

    /// Reverse-mode adjoints of the rank-0 `output` with respect to `wrt`,
    /// recorded as new nodes (so they can be differentiated again).
    ///
    /// Handles that `output` does not depend on receive a zero constant.
    pub fn grad(&mut self, output: Value, wrt: &[Value]) -> Result<Vec<Value>> {
        if self.value(output).rank() != 0 {
            return Err(shape_err(
                "grad",
                format!("output must be rank 0, got {:?}", self.shape(output)),
            ));
        }
        let end = output.0 + 1;
        let start = match wrt.iter().map(|w| w.0).min() {
            Some(s) if s < end => s,
            _ => return Ok(self.zeros_like_all(wrt)),
        };

        // Forward reachability from the requested handles bounds the sweep.
        let mut needs = vec![false; end];
        for w in wrt {
            if w.0 < end {
                needs[w.0] = true;
            }
        }
        for i in start..end {
            if !needs[i] && self.nodes[i].parents.iter().any(|p| p.0 >= start && needs[p.0]) {
                needs[i] = true;
            }
        }
        if !needs[output.0] {
            return Ok(self.zeros_like_all(wrt));
        }

        let mut adj: Vec<Option<Value>> = vec![None; end];
        adj[output.0] = Some(self.scalar(1.0));
        for i in (start..end).rev() {
            let Some(gi) = adj[i] else { continue };
            if !needs[i] {
                continue;
            }
            let (kind, parents) = {
                let n = &self.nodes[i];
                (n.kind.clone(), n.parents.clone())
            };
            let Kind::Op(op) = kind else { continue };
            let mask: Vec<bool> = parents.iter().map(|p| p.0 >= start && needs[p.0]).collect();
            if !mask.iter().any(|&m| m) {
                continue;
            }
            let contributions = self.vjp(&op, Value(i), &parents, &mask, gi)?;
            for (p, c) in contributions {
                adj[p.0] = Some(match adj[p.0] {
                    None => c,
                    Some(prev) => self.add(prev, c)?,
                });
            }
        }

        let mut out = Vec::with_capacity(wrt.len());
        for &w in wrt {
            let g = match adj.get(w.0).copied().flatten() {
                Some(g) => g,
                None => {
                    let shape = self.shape(w).to_vec();
                    self.constant(Tensor::zeros(&shape))
                }
            };
            out.push(g);
        }
        Ok(out)
    }

    /// Numeric gradients of the rank-0 `scalar`. Nodes created while computing
    /// them are discarded, so the graph is left as it was.
    pub fn backward(&mut self, scalar: Value, wrt: &[Value]) -> Result<GradientMap> {
        let mark = self.nodes.len();
        let res = self.grad(scalar, wrt).map(|grads| GradientMap {
            entries: wrt
                .iter()
                .zip(&grads)
                .map(|(&w, &g)| (w, self.value(g).clone()))
                .collect(),
        });
        self.nodes.truncate(mark);
        res
    }

    /// Per-row derivatives of `output` with respect to the leaf `input`.
    ///
    /// `output` is `N × 1` and row `i` must depend only on row `i` of the
    /// `N × d` input (true for any pointwise network). Order 1 returns the
    /// `N × d` gradient; order 2 returns the `N × d` matrix of pure second
    /// derivatives `∂²u/∂x_j²`. The result is recorded and can be
    /// differentiated again with respect to parameters.
    pub fn derivative_wrt_input(&mut self, output: Value, input: Value, order: u8) -> Result<Value> {
        if !self.is_leaf(input) {
            return Err(Error::Invalid("input derivative requires a leaf input".into()));
        }
        if self.value(output).cols() != 1 {
            return Err(shape_err(
                "derivative_wrt_input",
                format!("output must be N x 1, got {:?}", self.shape(output)),
            ));
        }
        match order {
            1 => {
                let s = self.sum(output)?;
                Ok(self.grad(s, &[input])?[0])
            }
            2 => {
                let first = self.derivative_wrt_input(output, input, 1)?;
                let d = self.value(input).cols();
                let mut cols = Vec::with_capacity(d);
                for j in 0..d {
                    let c = self.col(first, j)?;
                    let s = self.sum(c)?;
                    let h = self.grad(s, &[input])?[0];
                    cols.push(self.col(h, j)?);
                }
                self.concat_cols(&cols)
            }
            k => Err(Error::Unsupported(format!(
                "input derivatives of order {k}; at most 2 is supported"
            ))),
        }
    }

    fn zeros_like_all(&mut self, wrt: &[Value]) -> Vec<Value> {
        wrt.iter()
            .map(|&w| {
                let shape = self.shape(w).to_vec();
                self.constant(Tensor::zeros(&shape))
            })
            .collect()
    }

    fn vjp(
        &mut self,
        op: &OpTag,
        node: Value,
        parents: &[Value],
        mask: &[bool],
        g: Value,
    ) -> Result<Vec<(Value, Value)>> {
        let mut out = Vec::with_capacity(parents.len());
        let a = parents[0];
        match op {
            OpTag::Add => {
                for (i, &p) in parents.iter().enumerate() {
                    if mask[i] {
                        out.push((p, g));
                    }
                }
            }
            OpTag::Sub => {
                if mask[0] {
                    out.push((a, g));
                }
                if mask[1] {
                    out.push((parents[1], self.neg(g)?));
                }
            }
            OpTag::Mul => {
                let b = parents[1];
                if mask[0] {
                    out.push((a, self.mul(g, b)?));
                }
                if mask[1] {
                    out.push((b, self.mul(g, a)?));
                }
            }
            OpTag::Neg => out.push((a, self.neg(g)?)),
            OpTag::Scale(c) => out.push((a, self.scale(g, *c)?)),
            OpTag::Offset(_) => out.push((a, g)),
            OpTag::MatMul => {
                let b = parents[1];
                if mask[0] {
                    let bt = self.transpose(b)?;
                    out.push((a, self.matmul(g, bt)?));
                }
                if mask[1] {
                    let at = self.transpose(a)?;
                    out.push((b, self.matmul(at, g)?));
                }
            }
            OpTag::Transpose => out.push((a, self.transpose(g)?)),
            OpTag::Sin => {
                let c = self.cos(a)?;
                out.push((a, self.mul(g, c)?));
            }
            OpTag::Cos => {
                let s = self.sin(a)?;
                let gs = self.mul(g, s)?;
                out.push((a, self.neg(gs)?));
            }
            OpTag::Tanh => {
                let y2 = self.square(node)?;
                let ny2 = self.neg(y2)?;
                let d = self.offset(ny2, 1.0)?;
                out.push((a, self.mul(g, d)?));
            }
            OpTag::Exp => out.push((a, self.mul(g, node)?)),
            OpTag::Sigmoid => {
                let ny = self.neg(node)?;
                let one_minus = self.offset(ny, 1.0)?;
                let d = self.mul(node, one_minus)?;
                out.push((a, self.mul(g, d)?));
            }
            OpTag::Recip => {
                let y2 = self.square(node)?;
                let gy2 = self.mul(g, y2)?;
                out.push((a, self.neg(gy2)?));
            }
            OpTag::Sqrt => {
                let r = self.recip(node)?;
                let h = self.scale(r, 0.5)?;
                out.push((a, self.mul(g, h)?));
            }
            OpTag::Powi(n) => {
                if *n != 0 {
                    let p = self.powi(a, n - 1)?;
                    let d = self.scale(p, f64::from(*n))?;
                    out.push((a, self.mul(g, d)?));
                }
            }
            OpTag::Asin | OpTag::Acos => {
                let a2 = self.square(a)?;
                let na2 = self.neg(a2)?;
                let one_minus = self.offset(na2, 1.0)?;
                let root = self.sqrt(one_minus)?;
                let inv = self.recip(root)?;
                let d = self.mul(g, inv)?;
                let d = if matches!(op, OpTag::Acos) { self.neg(d)? } else { d };
                out.push((a, d));
            }
            OpTag::Sum => {
                let shape = self.shape(a).to_vec();
                out.push((a, self.broadcast_scalar(g, &shape)?));
            }
            OpTag::BroadcastScalar(_) => {
                let s = self.sum(g)?;
                let shape = self.shape(a).to_vec();
                let s = if shape.is_empty() { s } else { self.reshape(s, &shape)? };
                out.push((a, s));
            }
            OpTag::SumRows => {
                let rows = self.value(a).rows();
                out.push((a, self.broadcast_rows(g, rows)?));
            }
            OpTag::BroadcastRows(_) => out.push((a, self.sum_rows(g)?)),
            OpTag::SumCols => {
                let cols = self.value(a).cols();
                out.push((a, self.broadcast_cols(g, cols)?));
            }
            OpTag::BroadcastCols(_) => out.push((a, self.sum_cols(g)?)),
            OpTag::ConcatCols => {
                let mut offset = 0;
                for (i, &p) in parents.iter().enumerate() {
                    let w = self.value(p).cols();
                    if mask[i] {
                        out.push((p, self.slice_cols(g, offset, w)?));
                    }
                    offset += w;
                }
            }
            OpTag::SliceCols { start, .. } => {
                let total = self.value(a).cols();
                out.push((a, self.pad_cols(g, *start, total)?));
            }
            OpTag::PadCols { start, .. } => {
                let len = self.value(a).cols();
                out.push((a, self.slice_cols(g, *start, len)?));
            }
            OpTag::Reshape(_) => {
                let shape = self.shape(a).to_vec();
                out.push((a, self.reshape(g, &shape)?));
            }
        }
        Ok(out)
    }
}

fn map(a: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::from_parts(a.shape().to_vec(), a.data().iter().map(|&x| f(x)).collect())
}

fn rank2(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    if t.rank() != 2 {
        return Err(shape_err(op, format!("expected rank 2, got {:?}", t.shape())));
    }
    Ok((t.shape()[0], t.shape()[1]))
}
