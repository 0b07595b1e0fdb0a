//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Graph`] records every operation applied to its nodes in append order,
//! so the inputs of a node always precede it. [`Graph::backward`] walks the
//! tape once in reverse, pushing adjoints to the inputs of each node. The
//! graph is rebuilt for every loss evaluation; nothing is shared between
//! graphs except the parameter values copied in as leaves.
//!
//! Gradients of leaf nodes accumulate across `backward` calls until
//! [`Graph::zero_grad`]. Intermediate adjoints are discarded after each pass.

use ndarray::linalg::general_mat_mul;
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Elementwise nonlinearities used by dense layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// `max(0, x)`; the subgradient at 0 is 0.
    Relu,
    Tanh,
    Sigmoid,
    Linear,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Linear => x,
        }
    }

    /// Derivative given the input `x` and the forward output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Linear => 1.0,
        }
    }
}

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(sigmoid(x))` without forming `sigmoid(x)`.
pub fn log_sigmoid(x: f64) -> f64 {
    x.min(0.0) - (-x.abs()).exp().ln_1p()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduction {
    Sum,
    Mean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Broadcast {
    Same,
    RhsScalar,
    LhsScalar,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul {
        a: usize,
        b: usize,
        m: usize,
        k: usize,
        p: usize,
    },
    Add(usize, usize, Broadcast),
    Sub(usize, usize, Broadcast),
    Mul(usize, usize, Broadcast),
    AddBias {
        x: usize,
        bias: usize,
    },
    Neg(usize),
    Scale(usize, f64),
    Square(usize),
    Log {
        a: usize,
        floor: Option<f64>,
    },
    Act(Activation, usize),
    LogSigmoid(usize),
    Concat {
        parts: Vec<usize>,
        axis: usize,
    },
    Slice {
        a: usize,
        axis: usize,
        start: usize,
    },
    Reshape(usize),
    Reduce {
        a: usize,
        kind: Reduction,
        axis: Option<usize>,
    },
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// Append-only operation tape.
#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

/// `(outer, axis extent, inner)` decomposition of a row-major shape.
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// `out = op(a) · op(b) + beta · out` where `op` optionally transposes.
/// `a_dims`/`b_dims` are the stored (rows, cols) of each operand.
fn gemm(
    a: &[f64],
    a_dims: (usize, usize),
    trans_a: bool,
    b: &[f64],
    b_dims: (usize, usize),
    trans_b: bool,
    out: &mut [f64],
    beta: f64,
) {
    let av = ArrayView2::from_shape(a_dims, a).expect("gemm lhs layout");
    let bv = ArrayView2::from_shape(b_dims, b).expect("gemm rhs layout");
    let av = if trans_a { av.reversed_axes() } else { av };
    let bv = if trans_b { bv.reversed_axes() } else { bv };
    let mut cv = ndarray::ArrayViewMut2::from_shape((av.nrows(), bv.ncols()), out)
        .expect("gemm output layout");
    general_mat_mul(1.0, &av, &bv, beta, &mut cv);
}

fn check_finite(op: &'static str, inputs: &[&Tensor], out: &[f64]) -> Result<()> {
    if cfg!(debug_assertions)
        && inputs.iter().all(|t| t.is_finite())
        && !out.iter().all(|v| v.is_finite())
    {
        return Err(Error::Domain {
            op,
            detail: "non-finite output from finite inputs".into(),
        });
    }
    Ok(())
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of a leaf, if any has been propagated to it.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        let g = self.grads[v.0].as_ref()?;
        Tensor::new(self.nodes[v.0].value.shape().to_vec(), g.clone()).ok()
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value: value.with_requires_grad(false),
            requires_grad,
        });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, ids: &[usize]) -> bool {
        ids.iter().any(|&i| self.nodes[i].requires_grad)
    }

    /// Leaf node; tracked when `t.requires_grad()` is set.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        let rg = t.requires_grad();
        self.push(Op::Leaf, t, rg)
    }

    /// Gradient-tracked leaf.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t, true)
    }

    /// Untracked leaf.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 2 || tb.rank() != 2 || ta.shape()[1] != tb.shape()[0] {
            return Err(Error::dim("matmul", ta.shape(), tb.shape()));
        }
        let (m, k, p) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let mut out = vec![0.0; m * p];
        gemm(ta.data(), (m, k), false, tb.data(), (k, p), false, &mut out, 0.0);
        check_finite("matmul", &[ta, tb], &out)?;
        let value = Tensor::matrix(m, p, out)?;
        let rg = self.rg(&[a.0, b.0]);
        Ok(self.push(
            Op::MatMul {
                a: a.0,
                b: b.0,
                m,
                k,
                p,
            },
            value,
            rg,
        ))
    }

    fn broadcast(&self, op: &'static str, a: Var, b: Var) -> Result<(Broadcast, Vec<usize>)> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() == tb.shape() {
            Ok((Broadcast::Same, ta.shape().to_vec()))
        } else if tb.numel() == 1 {
            Ok((Broadcast::RhsScalar, ta.shape().to_vec()))
        } else if ta.numel() == 1 {
            Ok((Broadcast::LhsScalar, tb.shape().to_vec()))
        } else {
            Err(Error::dim(op, ta.shape(), tb.shape()))
        }
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        make: impl Fn(usize, usize, Broadcast) -> Op,
    ) -> Result<Var> {
        let (bc, shape) = self.broadcast(name, a, b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let n: usize = shape.iter().product();
        let out: Vec<f64> = (0..n)
            .map(|i| {
                let x = if bc == Broadcast::LhsScalar { ta.data()[0] } else { ta.data()[i] };
                let y = if bc == Broadcast::RhsScalar { tb.data()[0] } else { tb.data()[i] };
                f(x, y)
            })
            .collect();
        check_finite(name, &[ta, tb], &out)?;
        let value = Tensor::new(shape, out)?;
        let rg = self.rg(&[a.0, b.0]);
        Ok(self.push(make(a.0, b.0, bc), value, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul)
    }

    /// Adds a length-`k` bias to every row of an `m × k` matrix.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(bias));
        if tx.rank() != 2 || tb.numel() != tx.shape()[1] {
            return Err(Error::dim("add_bias", tx.shape(), tb.shape()));
        }
        let k = tx.shape()[1];
        let out: Vec<f64> = tx
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| v + tb.data()[i % k])
            .collect();
        check_finite("add_bias", &[tx, tb], &out)?;
        let value = Tensor::new(tx.shape().to_vec(), out)?;
        let rg = self.rg(&[x.0, bias.0]);
        Ok(self.push(Op::AddBias { x: x.0, bias: bias.0 }, value, rg))
    }

    fn unary(&mut self, name: &'static str, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var> {
        let ta = self.value(a);
        let out: Vec<f64> = ta.data().iter().map(|&x| f(x)).collect();
        check_finite(name, &[ta], &out)?;
        let value = Tensor::new(ta.shape().to_vec(), out)?;
        let rg = self.rg(&[a.0]);
        Ok(self.push(op, value, rg))
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.unary("neg", a, |x| -x, Op::Neg(a.0))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        self.unary("scale", a, |x| s * x, Op::Scale(a.0, s))
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.unary("square", a, |x| x * x, Op::Square(a.0))
    }

    /// Natural log; every input must be strictly positive.
    pub fn log(&mut self, a: Var) -> Result<Var> {
        if let Some(bad) = self.value(a).data().iter().find(|&&x| !(x > 0.0)) {
            return Err(Error::Domain {
                op: "log",
                detail: format!("non-positive argument {bad}"),
            });
        }
        self.unary("log", a, f64::ln, Op::Log { a: a.0, floor: None })
    }

    /// `log(max(x, floor))`; the gradient is zero where the floor is active.
    pub fn log_clamped(&mut self, a: Var, floor: f64) -> Result<Var> {
        self.unary(
            "log",
            a,
            |x| x.max(floor).ln(),
            Op::Log {
                a: a.0,
                floor: Some(floor),
            },
        )
    }

    pub fn activation(&mut self, kind: Activation, a: Var) -> Result<Var> {
        if kind == Activation::Linear {
            return Ok(a);
        }
        self.unary("activation", a, |x| kind.apply(x), Op::Act(kind, a.0))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.activation(Activation::Relu, a)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.activation(Activation::Tanh, a)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.activation(Activation::Sigmoid, a)
    }

    /// Fused `log(sigmoid(x))`, finite for every finite `x`.
    pub fn log_sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary("log_sigmoid", a, log_sigmoid, Op::LogSigmoid(a.0))
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::contract("concat of zero parts"))?;
        let base = self.value(*first).shape().to_vec();
        if axis >= base.len() {
            return Err(Error::dim("concat", &base, &[axis]));
        }
        let mut total = 0;
        for p in parts {
            let s = self.value(*p).shape();
            let agrees = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !agrees {
                return Err(Error::dim("concat", &base, s));
            }
            total += s[axis];
        }
        let (outer, _, inner) = split_axis(&base, axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for p in parts {
                let t = self.value(*p);
                let block = t.shape()[axis] * inner;
                out.extend_from_slice(&t.data()[o * block..(o + 1) * block]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let value = Tensor::new(shape, out)?;
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        let rg = self.rg(&ids);
        Ok(self.push(Op::Concat { parts: ids, axis }, value, rg))
    }

    /// `len` entries along `axis` starting at `start`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let ta = self.value(a);
        let shape = ta.shape().to_vec();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return Err(Error::dim("slice", &shape, &[axis, start, len]));
        }
        let (outer, extent, inner) = split_axis(&shape, axis);
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let from = (o * extent + start) * inner;
            out.extend_from_slice(&ta.data()[from..from + len * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = len;
        let value = Tensor::new(out_shape, out)?;
        let rg = self.rg(&[a.0]);
        Ok(self.push(Op::Slice { a: a.0, axis, start }, value, rg))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let value = self.value(a).clone().reshape(shape)?;
        let rg = self.rg(&[a.0]);
        Ok(self.push(Op::Reshape(a.0), value, rg))
    }

    /// Sum or mean over one axis, or over everything when `axis` is `None`.
    pub fn reduce(&mut self, kind: Reduction, a: Var, axis: Option<usize>) -> Result<Var> {
        let ta = self.value(a);
        let value = match axis {
            None => {
                let s: f64 = ta.data().iter().sum();
                let v = match kind {
                    Reduction::Sum => s,
                    Reduction::Mean => s / ta.numel() as f64,
                };
                Tensor::scalar(v)
            }
            Some(ax) => {
                if ax >= ta.rank() {
                    return Err(Error::dim("reduce", ta.shape(), &[ax]));
                }
                let (outer, extent, inner) = split_axis(ta.shape(), ax);
                let mut out = vec![0.0; outer * inner];
                for o in 0..outer {
                    for e in 0..extent {
                        let row = &ta.data()[(o * extent + e) * inner..(o * extent + e + 1) * inner];
                        for (acc, v) in out[o * inner..(o + 1) * inner].iter_mut().zip(row) {
                            *acc += v;
                        }
                    }
                }
                if kind == Reduction::Mean {
                    out.iter_mut().for_each(|v| *v /= extent as f64);
                }
                let mut shape = ta.shape().to_vec();
                shape.remove(ax);
                Tensor::new(shape, out)?
            }
        };
        check_finite("reduce", &[ta], value.data())?;
        let rg = self.rg(&[a.0]);
        Ok(self.push(Op::Reduce { a: a.0, kind, axis }, value, rg))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.reduce(Reduction::Sum, a, None)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.reduce(Reduction::Mean, a, None)
    }

    /// Propagates `∂loss/∂node` to every tracked leaf.
    ///
    /// Leaf gradients add onto whatever earlier calls left there.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes.is_empty() || loss.0 >= self.nodes.len() {
            return Err(Error::contract("backward on an empty graph"));
        }
        if self.nodes[loss.0].value.numel() != 1 {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        for (node, g) in self.nodes.iter().zip(self.grads.iter_mut()) {
            if !matches!(node.op, Op::Leaf) {
                *g = None;
            }
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        let Graph { nodes, grads } = self;
        accum(nodes, grads, loss.0)[0] += 1.0;

        for i in (0..=loss.0).rev() {
            if matches!(nodes[i].op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let out = &nodes[i].value;
            match &nodes[i].op {
                Op::Leaf => {}
                &Op::MatMul { a, b, m, k, p } => {
                    if nodes[a].requires_grad {
                        let bv = nodes[b].value.data();
                        gemm(&g, (m, p), false, bv, (k, p), true, accum(nodes, grads, a), 1.0);
                    }
                    if nodes[b].requires_grad {
                        let av = nodes[a].value.data();
                        gemm(av, (m, k), true, &g, (m, p), false, accum(nodes, grads, b), 1.0);
                    }
                }
                &Op::Add(a, b, bc) => {
                    push_broadcast(nodes, grads, a, bc, Broadcast::LhsScalar, &g, |gi, _| gi);
                    push_broadcast(nodes, grads, b, bc, Broadcast::RhsScalar, &g, |gi, _| gi);
                }
                &Op::Sub(a, b, bc) => {
                    push_broadcast(nodes, grads, a, bc, Broadcast::LhsScalar, &g, |gi, _| gi);
                    push_broadcast(nodes, grads, b, bc, Broadcast::RhsScalar, &g, |gi, _| -gi);
                }
                &Op::Mul(a, b, bc) => {
                    let (av, bv) = (nodes[a].value.data().to_vec(), nodes[b].value.data().to_vec());
                    let pick = |v: &[f64], scalar: bool, i: usize| if scalar { v[0] } else { v[i] };
                    push_broadcast(nodes, grads, a, bc, Broadcast::LhsScalar, &g, |gi, i| {
                        gi * pick(&bv, bc == Broadcast::RhsScalar, i)
                    });
                    push_broadcast(nodes, grads, b, bc, Broadcast::RhsScalar, &g, |gi, i| {
                        gi * pick(&av, bc == Broadcast::LhsScalar, i)
                    });
                }
                &Op::AddBias { x, bias } => {
                    if nodes[x].requires_grad {
                        add_into(accum(nodes, grads, x), &g);
                    }
                    if nodes[bias].requires_grad {
                        let k = nodes[bias].value.numel();
                        let gb = accum(nodes, grads, bias);
                        for (i, gi) in g.iter().enumerate() {
                            gb[i % k] += gi;
                        }
                    }
                }
                &Op::Neg(a) => map_into(nodes, grads, a, &g, |gi, _| -gi),
                &Op::Scale(a, s) => map_into(nodes, grads, a, &g, |gi, _| s * gi),
                &Op::Square(a) => {
                    let av = nodes[a].value.data().to_vec();
                    map_into(nodes, grads, a, &g, |gi, i| 2.0 * av[i] * gi)
                }
                &Op::Log { a, floor } => {
                    let av = nodes[a].value.data().to_vec();
                    map_into(nodes, grads, a, &g, |gi, i| match floor {
                        Some(f) if av[i] <= f => 0.0,
                        _ => gi / av[i],
                    })
                }
                &Op::Act(kind, a) => {
                    let av = nodes[a].value.data().to_vec();
                    let yv = out.data().to_vec();
                    map_into(nodes, grads, a, &g, |gi, i| gi * kind.derivative(av[i], yv[i]))
                }
                &Op::LogSigmoid(a) => {
                    let av = nodes[a].value.data().to_vec();
                    map_into(nodes, grads, a, &g, |gi, i| gi * sigmoid(-av[i]))
                }
                Op::Concat { parts, axis } => {
                    let (outer, _, inner) = split_axis(out.shape(), *axis);
                    let mut offset = 0;
                    let widths: Vec<usize> =
                        parts.iter().map(|&p| nodes[p].value.shape()[*axis] * inner).collect();
                    let row = widths.iter().sum::<usize>();
                    for (&p, &w) in parts.iter().zip(&widths) {
                        if nodes[p].requires_grad {
                            let gp = accum(nodes, grads, p);
                            for o in 0..outer {
                                let src = &g[o * row + offset..o * row + offset + w];
                                add_into(&mut gp[o * w..(o + 1) * w], src);
                            }
                        }
                        offset += w;
                    }
                }
                &Op::Slice { a, axis, start } => {
                    if nodes[a].requires_grad {
                        let (outer, extent, inner) = split_axis(nodes[a].value.shape(), axis);
                        let len = out.shape()[axis];
                        let ga = accum(nodes, grads, a);
                        for o in 0..outer {
                            let dst = (o * extent + start) * inner;
                            let src = o * len * inner;
                            add_into(&mut ga[dst..dst + len * inner], &g[src..src + len * inner]);
                        }
                    }
                }
                &Op::Reshape(a) => map_into(nodes, grads, a, &g, |gi, _| gi),
                &Op::Reduce { a, kind, axis } => {
                    if nodes[a].requires_grad {
                        let shape = nodes[a].value.shape().to_vec();
                        let ga = accum(nodes, grads, a);
                        match axis {
                            None => {
                                let scale = match kind {
                                    Reduction::Sum => 1.0,
                                    Reduction::Mean => 1.0 / ga.len() as f64,
                                };
                                ga.iter_mut().for_each(|v| *v += g[0] * scale);
                            }
                            Some(ax) => {
                                let (outer, extent, inner) = split_axis(&shape, ax);
                                let scale = match kind {
                                    Reduction::Sum => 1.0,
                                    Reduction::Mean => 1.0 / extent as f64,
                                };
                                for o in 0..outer {
                                    for e in 0..extent {
                                        let dst = (o * extent + e) * inner;
                                        for j in 0..inner {
                                            ga[dst + j] += g[o * inner + j] * scale;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn accum<'a>(nodes: &[Node], grads: &'a mut [Option<Vec<f64>>], id: usize) -> &'a mut Vec<f64> {
    let n = nodes[id].value.numel();
    grads[id].get_or_insert_with(|| vec![0.0; n])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn map_into(
    nodes: &[Node],
    grads: &mut [Option<Vec<f64>>],
    a: usize,
    g: &[f64],
    f: impl Fn(f64, usize) -> f64,
) {
    if !nodes[a].requires_grad {
        return;
    }
    let ga = accum(nodes, grads, a);
    for (i, (d, gi)) in ga.iter_mut().zip(g).enumerate() {
        *d += f(*gi, i);
    }
}

/// Pushes a binary-op adjoint to one operand, summing when that operand was
/// the broadcast scalar (`scalar_case`).
fn push_broadcast(
    nodes: &[Node],
    grads: &mut [Option<Vec<f64>>],
    id: usize,
    bc: Broadcast,
    scalar_case: Broadcast,
    g: &[f64],
    f: impl Fn(f64, usize) -> f64,
) {
    if !nodes[id].requires_grad {
        return;
    }
    let dst = accum(nodes, grads, id);
    if bc == scalar_case {
        dst[0] += g.iter().enumerate().map(|(i, &gi)| f(gi, i)).sum::<f64>();
    } else {
        for (i, (d, &gi)) in dst.iter_mut().zip(g).enumerate() {
            *d += f(gi, i);
        }
    }
}
