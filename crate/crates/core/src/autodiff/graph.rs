use super::tensor::{broadcast_shape, for_each_broadcast, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Binary {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Unary {
    Neg,
    Tanh,
    Sigmoid,
    Exp,
    /// `max(x, 0)`, with subgradient 0 at the kink.
    Max0,
    Square,
    /// `x^(-1/2)`
    Rsqrt,
    AddScalar(f64),
    MulScalar(f64),
}

#[derive(Clone, Debug)]
pub(crate) enum Op {
    Leaf { trainable: bool },
    Binary(Binary, Var, Var),
    Unary(Unary, Var),
    MatMul(Var, Var),
    SumAll(Var),
    MeanAll(Var),
    /// Reduction over the last axis, keeping it with extent 1.
    SumLast(Var),
    MeanLast(Var),
    Column(Var, usize),
    ConcatCols(Vec<Var>),
}

impl Op {
    fn parents(&self) -> Vec<Var> {
        match self {
            Op::Leaf { .. } => vec![],
            Op::Binary(_, a, b) | Op::MatMul(a, b) => vec![*a, *b],
            Op::Unary(_, a)
            | Op::SumAll(a)
            | Op::MeanAll(a)
            | Op::SumLast(a)
            | Op::MeanLast(a)
            | Op::Column(a, _) => vec![*a],
            Op::ConcatCols(vs) => vs.clone(),
        }
    }
}

struct Node {
    op: Op,
    value: Tensor,
    /// Depends on some trainable leaf.
    live: bool,
}

/// Append-only computation graph for reverse-mode differentiation.
///
/// Nodes are created in topological order: every parent id is smaller
/// than its child id, so a backward sweep is a reverse scan.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of a scalar root, indexed by node.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or zeros of `shape` when the root does not depend on it.
    pub fn get_or_zeros(&self, v: Var, shape: &[usize]) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(shape))
    }
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

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        let id = self.nodes.len();
        debug_assert!(op.parents().iter().all(|p| p.0 < id));
        let live = match &op {
            Op::Leaf { trainable } => *trainable,
            other => other.parents().iter().any(|p| self.nodes[p.0].live),
        };
        self.nodes.push(Node { op, value, live });
        Var(id)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn is_trainable(&self, v: Var) -> bool {
        matches!(self.nodes[v.0].op, Op::Leaf { trainable: true })
    }

    /// Ids of every trainable leaf, in creation order.
    pub fn trainable_leaves(&self) -> Vec<Var> {
        (0..self.nodes.len())
            .map(Var)
            .filter(|&v| self.is_trainable(v))
            .collect()
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf { trainable: true }, value)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf { trainable: false }, value)
    }

    /// Copy of `v` as a constant leaf; gradients do not flow through it.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    pub fn binary(&mut self, kind: Binary, a: Var, b: Var) -> Result<Var> {
        let value = {
            let (ta, tb) = (self.value(a), self.value(b));
            binary_forward(kind, ta, tb)?
        };
        Ok(self.push(Op::Binary(kind, a, b), value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Mul, a, b)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Div, a, b)
    }

    pub fn unary(&mut self, kind: Unary, a: Var) -> Var {
        let value = self.value(a).map(|x| unary_forward(kind, x));
        self.push(Op::Unary(kind, a), value)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(Unary::Neg, a)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(Unary::Tanh, a)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(Unary::Sigmoid, a)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(Unary::Exp, a)
    }

    pub fn max0(&mut self, a: Var) -> Var {
        self.unary(Unary::Max0, a)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(Unary::Square, a)
    }

    pub fn rsqrt(&mut self, a: Var) -> Var {
        self.unary(Unary::Rsqrt, a)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.unary(Unary::AddScalar(c), a)
    }

    pub fn mul_scalar(&mut self, a: Var, c: f64) -> Var {
        self.unary(Unary::MulScalar(c), a)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), value))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        self.push(Op::SumAll(a), value)
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let value = Tensor::scalar(t.sum() / t.len() as f64);
        self.push(Op::MeanAll(a), value)
    }

    pub fn sum_last(&mut self, a: Var) -> Var {
        let value = reduce_last(self.value(a), false);
        self.push(Op::SumLast(a), value)
    }

    pub fn mean_last(&mut self, a: Var) -> Var {
        let value = reduce_last(self.value(a), true);
        self.push(Op::MeanLast(a), value)
    }

    /// Column `j` of a 2-D node, as `[rows, 1]`.
    pub fn column(&mut self, a: Var, j: usize) -> Result<Var> {
        let t = self.value(a);
        if t.rank() != 2 || j >= t.cols() {
            return Err(Error::Dimension {
                op: "column",
                lhs: t.shape().to_vec(),
                rhs: vec![j],
            });
        }
        let (m, n) = (t.rows(), t.cols());
        let data = (0..m).map(|i| t.data()[i * n + j]).collect();
        let value = Tensor::new(vec![m, 1], data)?;
        Ok(self.push(Op::Column(a, j), value))
    }

    /// Horizontal concatenation of 2-D nodes sharing a row count.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Contract("concat_cols of nothing".into()))?;
        let m = self.value(*first).rows();
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let t = self.value(p);
            if t.rank() != 2 || t.rows() != m {
                return Err(Error::Dimension {
                    op: "concat_cols",
                    lhs: self.shape(*first).to_vec(),
                    rhs: t.shape().to_vec(),
                });
            }
            widths.push(t.cols());
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(m * total);
        for i in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        let value = Tensor::new(vec![m, total], data)?;
        Ok(self.push(Op::ConcatCols(parts.to_vec()), value))
    }

    /// Reverse sweep from a single-element `root`. Only nodes that depend on
    /// a trainable leaf receive gradients; constants report none.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let root_value = self.value(root);
        if root_value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward from non-scalar root of shape {:?}",
                root_value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Tensor::full(root_value.shape(), 1.0));

        for id in (0..=root.0).rev() {
            let node = &self.nodes[id];
            if !node.live {
                grads[id] = None;
                continue;
            }
            let Some(upstream) = grads[id].take() else {
                continue;
            };
            for (parent, contrib) in self.local_backward(node, &upstream)? {
                if !self.nodes[parent.0].live {
                    continue;
                }
                match &mut grads[parent.0] {
                    Some(acc) => acc.add_assign(&contrib),
                    slot @ None => *slot = Some(contrib),
                }
            }
            grads[id] = Some(upstream);
        }
        Ok(Gradients { grads })
    }

    fn local_backward(&self, node: &Node, up: &Tensor) -> Result<Vec<(Var, Tensor)>> {
        let out = &node.value;
        Ok(match &node.op {
            Op::Leaf { .. } => vec![],
            Op::Binary(kind, a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (la, lb) = (self.nodes[a.0].live, self.nodes[b.0].live);
                let (ga, gb) = binary_backward(*kind, ta, tb, out, up, la, lb)?;
                let mut res = Vec::with_capacity(2);
                if let Some(ga) = ga {
                    res.push((*a, ga));
                }
                if let Some(gb) = gb {
                    res.push((*b, gb));
                }
                res
            }
            Op::Unary(kind, a) => {
                let x = self.value(*a);
                let data = x
                    .data()
                    .iter()
                    .zip(out.data())
                    .zip(up.data())
                    .map(|((&xv, &yv), &g)| g * unary_derivative(*kind, xv, yv))
                    .collect();
                vec![(*a, Tensor::new(x.shape().to_vec(), data)?)]
            }
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let mut res = Vec::with_capacity(2);
                if self.nodes[a.0].live {
                    res.push((*a, up.matmul(&tb.transpose()?)?));
                }
                if self.nodes[b.0].live {
                    res.push((*b, ta.transpose()?.matmul(up)?));
                }
                res
            }
            Op::SumAll(a) => {
                let g = up.data()[0];
                vec![(*a, Tensor::full(self.shape(*a), g))]
            }
            Op::MeanAll(a) => {
                let n = self.value(*a).len() as f64;
                let g = up.data()[0] / n;
                vec![(*a, Tensor::full(self.shape(*a), g))]
            }
            Op::SumLast(a) | Op::MeanLast(a) => {
                let shape = self.shape(*a).to_vec();
                let n = *shape.last().unwrap_or(&1);
                let scale = if matches!(node.op, Op::MeanLast(_)) {
                    1.0 / n as f64
                } else {
                    1.0
                };
                let data = up
                    .data()
                    .iter()
                    .flat_map(|&g| std::iter::repeat_n(g * scale, n))
                    .collect();
                vec![(*a, Tensor::new(shape, data)?)]
            }
            Op::Column(a, j) => {
                let shape = self.shape(*a).to_vec();
                let n = shape[1];
                let mut g = Tensor::zeros(&shape);
                for (i, &u) in up.data().iter().enumerate() {
                    g.data_mut()[i * n + j] = u;
                }
                vec![(*a, g)]
            }
            Op::ConcatCols(parts) => {
                let m = out.rows();
                let total = out.cols();
                let mut offset = 0;
                let mut res = Vec::with_capacity(parts.len());
                for &p in parts {
                    let w = self.value(p).cols();
                    let mut data = Vec::with_capacity(m * w);
                    for i in 0..m {
                        data.extend_from_slice(&up.data()[i * total + offset..i * total + offset + w]);
                    }
                    res.push((p, Tensor::new(vec![m, w], data)?));
                    offset += w;
                }
                res
            }
        })
    }

    /// Forward-mode derivative of `output` along `tangent` placed on `input`,
    /// built from ordinary graph nodes so that the result is itself
    /// differentiable by [`Graph::backward`].
    ///
    /// Only nodes created after `input` and up to `output` are replayed.
    /// When `output` does not depend on `input` the result is a zero constant.
    pub fn jvp(&mut self, input: Var, tangent: Var, output: Var) -> Result<Var> {
        self.jvp_multi(&[(input, tangent)], output)
    }

    /// [`Graph::jvp`] with tangents on several inputs at once; the result is
    /// the sum of the individual directional derivatives. Seeded nodes are
    /// treated as independent variables even if one depends on another.
    pub fn jvp_multi(&mut self, seeds: &[(Var, Var)], output: Var) -> Result<Var> {
        for &(input, tangent) in seeds {
            if self.shape(input) != self.shape(tangent) {
                return Err(Error::Dimension {
                    op: "jvp",
                    lhs: self.shape(input).to_vec(),
                    rhs: self.shape(tangent).to_vec(),
                });
            }
        }
        let Some(start) = seeds
            .iter()
            .map(|(input, _)| input.0)
            .filter(|&id| id <= output.0)
            .min()
        else {
            let zeros = Tensor::zeros(self.shape(output));
            return Ok(self.constant(zeros));
        };
        let mut tangents: Vec<Option<Var>> = vec![None; output.0 - start + 1];
        let mut seeded = vec![false; output.0 - start + 1];
        for &(input, tangent) in seeds {
            if input.0 > output.0 {
                continue;
            }
            let slot = &mut tangents[input.0 - start];
            *slot = Some(match *slot {
                Some(prev) => self.add(prev, tangent)?,
                None => tangent,
            });
            seeded[input.0 - start] = true;
        }
        let lookup = |tangents: &Vec<Option<Var>>, v: Var| -> Option<Var> {
            if v.0 < start {
                None
            } else {
                tangents[v.0 - start]
            }
        };

        for id in start + 1..=output.0 {
            if seeded[id - start] {
                continue;
            }
            let op = self.nodes[id].op.clone();
            let node_var = Var(id);
            let t = match op {
                Op::Leaf { .. } => None,
                Op::Binary(kind, a, b) => {
                    let (ta, tb) = (lookup(&tangents, a), lookup(&tangents, b));
                    if ta.is_none() && tb.is_none() {
                        None
                    } else {
                        Some(self.binary_tangent(kind, a, b, node_var, ta, tb)?)
                    }
                }
                Op::Unary(kind, a) => match lookup(&tangents, a) {
                    None => None,
                    Some(ta) => Some(self.unary_tangent(kind, a, node_var, ta)?),
                },
                Op::MatMul(a, b) => {
                    let (ta, tb) = (lookup(&tangents, a), lookup(&tangents, b));
                    let left = match ta {
                        Some(ta) => Some(self.matmul(ta, b)?),
                        None => None,
                    };
                    let right = match tb {
                        Some(tb) => Some(self.matmul(a, tb)?),
                        None => None,
                    };
                    match (left, right) {
                        (Some(l), Some(r)) => Some(self.add(l, r)?),
                        (l, r) => l.or(r),
                    }
                }
                Op::SumAll(a) => lookup(&tangents, a).map(|ta| self.sum_all(ta)),
                Op::MeanAll(a) => lookup(&tangents, a).map(|ta| self.mean_all(ta)),
                Op::SumLast(a) => lookup(&tangents, a).map(|ta| self.sum_last(ta)),
                Op::MeanLast(a) => lookup(&tangents, a).map(|ta| self.mean_last(ta)),
                Op::Column(a, j) => match lookup(&tangents, a) {
                    None => None,
                    Some(ta) => Some(self.column(ta, j)?),
                },
                Op::ConcatCols(parts) => {
                    if parts.iter().all(|&p| lookup(&tangents, p).is_none()) {
                        None
                    } else {
                        let mut tparts = Vec::with_capacity(parts.len());
                        for &p in &parts {
                            let tp = match lookup(&tangents, p) {
                                Some(tp) => tp,
                                None => {
                                    let z = Tensor::zeros(self.shape(p));
                                    self.constant(z)
                                }
                            };
                            tparts.push(tp);
                        }
                        Some(self.concat_cols(&tparts)?)
                    }
                }
            };
            tangents[id - start] = t;
        }

        match tangents[output.0 - start] {
            Some(t) => Ok(t),
            None => {
                let zeros = Tensor::zeros(self.shape(output));
                Ok(self.constant(zeros))
            }
        }
    }

    fn expand_to(&mut self, t: Var, like: Var) -> Result<Var> {
        if self.shape(t) == self.shape(like) {
            return Ok(t);
        }
        let zeros = Tensor::zeros(self.shape(like));
        let z = self.constant(zeros);
        self.add(z, t)
    }

    fn binary_tangent(
        &mut self,
        kind: Binary,
        a: Var,
        b: Var,
        out: Var,
        ta: Option<Var>,
        tb: Option<Var>,
    ) -> Result<Var> {
        let t = match kind {
            Binary::Add => match (ta, tb) {
                (Some(x), Some(y)) => self.add(x, y)?,
                (x, y) => x.or(y).expect("at least one tangent"),
            },
            Binary::Sub => match (ta, tb) {
                (Some(x), Some(y)) => self.sub(x, y)?,
                (Some(x), None) => x,
                (None, Some(y)) => self.neg(y),
                (None, None) => unreachable!(),
            },
            Binary::Mul => {
                let l = match ta {
                    Some(x) => Some(self.mul(x, b)?),
                    None => None,
                };
                let r = match tb {
                    Some(y) => Some(self.mul(a, y)?),
                    None => None,
                };
                match (l, r) {
                    (Some(l), Some(r)) => self.add(l, r)?,
                    (l, r) => l.or(r).expect("at least one tangent"),
                }
            }
            Binary::Div => {
                // d(a/b) = (da - out * db) / b
                let num = match (ta, tb) {
                    (Some(x), Some(y)) => {
                        let oy = self.mul(out, y)?;
                        self.sub(x, oy)?
                    }
                    (Some(x), None) => x,
                    (None, Some(y)) => {
                        let oy = self.mul(out, y)?;
                        self.neg(oy)
                    }
                    (None, None) => unreachable!(),
                };
                self.div(num, b)?
            }
        };
        self.expand_to(t, out)
    }

    fn unary_tangent(&mut self, kind: Unary, a: Var, out: Var, ta: Var) -> Result<Var> {
        Ok(match kind {
            Unary::Neg => self.neg(ta),
            Unary::AddScalar(_) => ta,
            Unary::MulScalar(c) => self.mul_scalar(ta, c),
            Unary::Tanh => {
                let sq = self.square(out);
                let neg = self.mul_scalar(sq, -1.0);
                let deriv = self.add_scalar(neg, 1.0);
                self.mul(ta, deriv)?
            }
            Unary::Sigmoid => {
                let neg = self.mul_scalar(out, -1.0);
                let one_minus = self.add_scalar(neg, 1.0);
                let deriv = self.mul(out, one_minus)?;
                self.mul(ta, deriv)?
            }
            Unary::Exp => self.mul(ta, out)?,
            Unary::Max0 => {
                let mask = self.value(a).map(|x| if x > 0.0 { 1.0 } else { 0.0 });
                let m = self.constant(mask);
                self.mul(ta, m)?
            }
            Unary::Square => {
                let two_a = self.mul_scalar(a, 2.0);
                self.mul(ta, two_a)?
            }
            Unary::Rsqrt => {
                let sq = self.square(out);
                let cube = self.mul(sq, out)?;
                let deriv = self.mul_scalar(cube, -0.5);
                self.mul(ta, deriv)?
            }
        })
    }
}

fn unary_forward(kind: Unary, x: f64) -> f64 {
    match kind {
        Unary::Neg => -x,
        Unary::Tanh => x.tanh(),
        Unary::Sigmoid => {
            if x >= 0.0 {
                1.0 / (1.0 + (-x).exp())
            } else {
                let e = x.exp();
                e / (1.0 + e)
            }
        }
        Unary::Exp => x.exp(),
        Unary::Max0 => x.max(0.0),
        Unary::Square => x * x,
        Unary::Rsqrt => 1.0 / x.sqrt(),
        Unary::AddScalar(c) => x + c,
        Unary::MulScalar(c) => x * c,
    }
}

/// Derivative given input `x` and output `y`.
fn unary_derivative(kind: Unary, x: f64, y: f64) -> f64 {
    match kind {
        Unary::Neg => -1.0,
        Unary::Tanh => 1.0 - y * y,
        Unary::Sigmoid => y * (1.0 - y),
        Unary::Exp => y,
        Unary::Max0 => {
            if x > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Unary::Square => 2.0 * x,
        Unary::Rsqrt => -0.5 * y * y * y,
        Unary::AddScalar(_) => 1.0,
        Unary::MulScalar(c) => c,
    }
}

fn apply_binary(kind: Binary, a: f64, b: f64) -> f64 {
    match kind {
        Binary::Add => a + b,
        Binary::Sub => a - b,
        Binary::Mul => a * b,
        Binary::Div => a / b,
    }
}

fn binary_forward(kind: Binary, a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() == b.shape() {
        return a.zip_map(b, |x, y| apply_binary(kind, x, y));
    }
    let out_shape = broadcast_shape(a.shape(), b.shape()).ok_or_else(|| Error::Dimension {
        op: "elementwise",
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    })?;
    let len = out_shape.iter().product();
    let mut data = Vec::with_capacity(len);
    let (ad, bd) = (a.data(), b.data());
    for_each_broadcast(a.shape(), b.shape(), &out_shape, |_, i, j| {
        data.push(apply_binary(kind, ad[i], bd[j]))
    });
    Tensor::new(out_shape, data)
}

fn binary_backward(
    kind: Binary,
    a: &Tensor,
    b: &Tensor,
    out: &Tensor,
    up: &Tensor,
    need_a: bool,
    need_b: bool,
) -> Result<(Option<Tensor>, Option<Tensor>)> {
    let partials = |x: f64, y: f64, z: f64| -> (f64, f64) {
        match kind {
            Binary::Add => (1.0, 1.0),
            Binary::Sub => (1.0, -1.0),
            Binary::Mul => (y, x),
            Binary::Div => (1.0 / y, -z / y),
        }
    };
    let mut ga = need_a.then(|| Tensor::zeros(a.shape()));
    let mut gb = need_b.then(|| Tensor::zeros(b.shape()));
    let (ad, bd, od, ud) = (a.data(), b.data(), out.data(), up.data());
    let mut visit = |k: usize, i: usize, j: usize| {
        let (da, db) = partials(ad[i], bd[j], od[k]);
        if let Some(ga) = ga.as_mut() {
            ga.data_mut()[i] += ud[k] * da;
        }
        if let Some(gb) = gb.as_mut() {
            gb.data_mut()[j] += ud[k] * db;
        }
    };
    if a.shape() == b.shape() {
        for k in 0..ud.len() {
            visit(k, k, k);
        }
    } else {
        for_each_broadcast(a.shape(), b.shape(), out.shape(), visit);
    }
    Ok((ga, gb))
}

fn reduce_last(t: &Tensor, mean: bool) -> Tensor {
    let n = t.cols().max(1);
    let mut shape = t.shape().to_vec();
    if let Some(last) = shape.last_mut() {
        *last = 1;
    }
    let data = t
        .data()
        .chunks(n)
        .map(|c| {
            let s: f64 = c.iter().sum();
            if mean {
                s / n as f64
            } else {
                s
            }
        })
        .collect();
    Tensor::new(shape, data).expect("reduced shape matches data")
}
