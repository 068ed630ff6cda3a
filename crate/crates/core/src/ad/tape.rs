//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every operation executed during a forward pass as a
//! node holding its output value and the inputs it was computed from. Nodes
//! are appended in execution order, so the record is topologically sorted by
//! construction and [`Tape::backward`] only has to walk it once in reverse.
//!
//! The tape is rebuilt for each training step: parameters are pushed as
//! leaves, the loss is computed, and `backward` consumes the tape and hands
//! back one gradient buffer per differentiable leaf.

use std::collections::HashMap;
use std::sync::Arc;

use crate::ad::{Matrix, SparseRows};
use crate::error::{shape_err, DmacError, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddRow(Var, Var),
    Relu(Var),
    Softplus(Var),
    SoftmaxRows(Var),
    Transpose(Var),
    SumAll(Var),
    SumSquares(Var),
    SqDist(Var, Var),
    RecipOnePlus(Var),
    NormalizeRows(Var),
    LnClamped(Var, f64),
    SumRows(Var),
    SumCols(Var),
    SparseTMatMul(Arc<SparseRows>, Var),
    ScaleRows(Var, Arc<Vec<f64>>),
    Mean(Vec<Var>),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    needs_grad: bool,
    is_param: bool,
}

/// Ordered record of executed operations.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradient buffers for every differentiable leaf of a consumed tape.
#[derive(Debug, Default)]
pub struct Gradients {
    by_leaf: HashMap<Var, Matrix>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.by_leaf.get(&v)
    }

    pub fn take(&mut self, v: Var) -> Option<Matrix> {
        self.by_leaf.remove(&v)
    }

    pub fn len(&self) -> usize {
        self.by_leaf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_leaf.is_empty()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A differentiable leaf.
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push_node(value, Op::Leaf, true, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push_node(value, Op::Leaf, false, false)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        debug_assert_eq!(m.shape(), (1, 1));
        m.as_slice()[0]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push_node(&mut self, value: Matrix, op: Op, needs_grad: bool, is_param: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
            is_param,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, value: Matrix, op: Op, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.push_node(value, op, needs_grad, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b), &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y)?;
        Ok(self.push(out, Op::Sub(a, b), &[a, b]))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).scale(s);
        self.push(out, Op::Scale(a, s), &[a])
    }

    /// Adds the 1xm row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if bv.rows() != 1 || bv.cols() != av.cols() {
            return shape_err(
                "add_row",
                format!(
                    "{}x{} + row {}x{}",
                    av.rows(),
                    av.cols(),
                    bv.rows(),
                    bv.cols()
                ),
            );
        }
        let mut out = av.clone();
        let brow = bv.row(0);
        for i in 0..out.rows() {
            for (o, &x) in out.row_mut(i).iter_mut().zip(brow) {
                *o += x;
            }
        }
        Ok(self.push(out, Op::AddRow(a, b), &[a, b]))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(out, Op::Relu(a), &[a])
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let out = self.value(a).map(softplus);
        self.push(out, Op::Softplus(a), &[a])
    }

    /// Row-wise softmax, stabilized by subtracting each row's maximum.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let out = softmax_rows(self.value(a));
        self.push(out, Op::SoftmaxRows(a), &[a])
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        self.push(out, Op::Transpose(a), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Matrix::filled(1, 1, self.value(a).sum());
        self.push(out, Op::SumAll(a), &[a])
    }

    pub fn sum_squares(&mut self, a: Var) -> Var {
        let out = Matrix::filled(1, 1, self.value(a).frobenius_sq());
        self.push(out, Op::SumSquares(a), &[a])
    }

    /// Pairwise squared Euclidean distances between rows of `z` (nxd) and `u` (mxd).
    pub fn sq_dist(&mut self, z: Var, u: Var) -> Result<Var> {
        let (zv, uv) = (self.value(z), self.value(u));
        if zv.cols() != uv.cols() {
            return shape_err(
                "sq_dist",
                format!("row widths {} and {}", zv.cols(), uv.cols()),
            );
        }
        let out = Matrix::from_fn(zv.rows(), uv.rows(), |i, j| {
            crate::ad::matrix::sq_dist(zv.row(i), uv.row(j))
        });
        Ok(self.push(out, Op::SqDist(z, u), &[z, u]))
    }

    /// Elementwise `1 / (1 + x)`.
    pub fn recip_one_plus(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| 1.0 / (1.0 + x));
        self.push(out, Op::RecipOnePlus(a), &[a])
    }

    /// Divides each row by its sum.
    pub fn normalize_rows(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            let s: f64 = row.iter().sum();
            for x in row {
                *x /= s;
            }
        }
        self.push(out, Op::NormalizeRows(a), &[a])
    }

    /// Elementwise `ln(max(x, floor))`; the gradient is zero where the floor binds.
    pub fn ln_clamped(&mut self, a: Var, floor: f64) -> Var {
        let out = self.value(a).map(|x| x.max(floor).ln());
        self.push(out, Op::LnClamped(a, floor), &[a])
    }

    /// Row sums as an nx1 column.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let out = Matrix::from_vec(av.rows(), 1, av.row_sums()).expect("row sums");
        self.push(out, Op::SumRows(a), &[a])
    }

    /// Column sums as a 1xm row.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let out = Matrix::from_vec(1, av.cols(), av.col_sums()).expect("col sums");
        self.push(out, Op::SumCols(a), &[a])
    }

    /// `sᵀ · x` for a constant sparse `s`.
    pub fn sparse_t_matmul(&mut self, s: Arc<SparseRows>, x: Var) -> Result<Var> {
        let out = s.t_matmul_dense(self.value(x))?;
        Ok(self.push(out, Op::SparseTMatMul(s, x), &[x]))
    }

    /// Multiplies row `i` of `a` by the constant `w[i]`.
    pub fn scale_rows(&mut self, a: Var, w: Arc<Vec<f64>>) -> Result<Var> {
        let av = self.value(a);
        if w.len() != av.rows() {
            return shape_err(
                "scale_rows",
                format!("{} weights for {} rows", w.len(), av.rows()),
            );
        }
        let mut out = av.clone();
        for (i, &wi) in w.iter().enumerate() {
            for x in out.row_mut(i) {
                *x *= wi;
            }
        }
        Ok(self.push(out, Op::ScaleRows(a, w), &[a]))
    }

    /// Elementwise mean of equally shaped inputs.
    ///
    /// Each element is summed in sorted order, so the result does not depend
    /// on the order of `xs`.
    pub fn mean(&mut self, xs: &[Var]) -> Result<Var> {
        let Some(&first) = xs.first() else {
            return shape_err("mean", "no inputs");
        };
        let shape = self.value(first).shape();
        for &x in xs {
            if self.value(x).shape() != shape {
                let (r, c) = self.value(x).shape();
                return shape_err(
                    "mean",
                    format!("{r}x{c} vs {}x{}", shape.0, shape.1),
                );
            }
        }
        let k = xs.len() as f64;
        let mut out = Matrix::zeros(shape.0, shape.1);
        let mut buf = Vec::with_capacity(xs.len());
        for (e, o) in out.as_mut_slice().iter_mut().enumerate() {
            buf.clear();
            buf.extend(xs.iter().map(|&x| self.value(x).as_slice()[e]));
            buf.sort_by(f64::total_cmp);
            *o = buf.iter().sum::<f64>() / k;
        }
        Ok(self.push(out, Op::Mean(xs.to_vec()), xs))
    }

    /// Propagates d`loss`/d(leaf) to every differentiable leaf, consuming the record.
    pub fn backward(self, loss: Var) -> Result<Gradients> {
        let shape = self.value(loss).shape();
        if shape != (1, 1) {
            return Err(DmacError::Contract(format!(
                "backward needs a 1x1 loss, got {}x{}",
                shape.0, shape.1
            )));
        }
        let nodes = self.nodes;
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));

        for idx in (0..=loss.0).rev() {
            let node = &nodes[idx];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let val = |v: Var| &nodes[v.0].value;
            let mut send = |v: Var, d: Matrix| {
                if !nodes[v.0].needs_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(acc) => acc.add_assign(&d).expect("gradient shape"),
                    slot @ None => *slot = Some(d),
                }
            };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    send(*a, g.matmul_t(val(*b))?);
                    send(*b, val(*a).t_matmul(&g)?);
                }
                Op::Add(a, b) => {
                    send(*a, g.clone());
                    send(*b, g);
                }
                Op::Sub(a, b) => {
                    send(*a, g.clone());
                    send(*b, g.scale(-1.0));
                }
                Op::Mul(a, b) => {
                    send(*a, g.zip_map(val(*b), |x, y| x * y)?);
                    send(*b, g.zip_map(val(*a), |x, y| x * y)?);
                }
                Op::Scale(a, s) => send(*a, g.scale(*s)),
                Op::AddRow(a, b) => {
                    let cs = Matrix::from_vec(1, g.cols(), g.col_sums())?;
                    send(*a, g);
                    send(*b, cs);
                }
                Op::Relu(a) => {
                    send(*a, g.zip_map(val(*a), |gv, x| if x > 0.0 { gv } else { 0.0 })?);
                }
                Op::Softplus(a) => {
                    send(*a, g.zip_map(val(*a), |gv, x| gv * sigmoid(x))?);
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut d = Matrix::zeros(y.rows(), y.cols());
                    for i in 0..y.rows() {
                        let (yr, gr) = (y.row(i), g.row(i));
                        let inner = crate::ad::matrix::dot(yr, gr);
                        for ((o, &yv), &gv) in d.row_mut(i).iter_mut().zip(yr).zip(gr) {
                            *o = yv * (gv - inner);
                        }
                    }
                    send(*a, d);
                }
                Op::Transpose(a) => send(*a, g.transpose()),
                Op::SumAll(a) => {
                    let (r, c) = val(*a).shape();
                    send(*a, Matrix::filled(r, c, g.as_slice()[0]));
                }
                Op::SumSquares(a) => {
                    let s = 2.0 * g.as_slice()[0];
                    send(*a, val(*a).scale(s));
                }
                Op::SqDist(z, u) => {
                    let (zv, uv) = (val(*z), val(*u));
                    if nodes[z.0].needs_grad {
                        let rs = g.row_sums();
                        let gu = g.matmul(uv)?;
                        let dz = Matrix::from_fn(zv.rows(), zv.cols(), |i, k| {
                            2.0 * (rs[i] * zv[(i, k)] - gu[(i, k)])
                        });
                        send(*z, dz);
                    }
                    if nodes[u.0].needs_grad {
                        let cs = g.col_sums();
                        let gz = g.t_matmul(zv)?;
                        let du = Matrix::from_fn(uv.rows(), uv.cols(), |j, k| {
                            2.0 * (cs[j] * uv[(j, k)] - gz[(j, k)])
                        });
                        send(*u, du);
                    }
                }
                Op::RecipOnePlus(a) => {
                    send(*a, g.zip_map(&node.value, |gv, y| -gv * y * y)?);
                }
                Op::NormalizeRows(a) => {
                    let (x, y) = (val(*a), &node.value);
                    let mut d = Matrix::zeros(x.rows(), x.cols());
                    for i in 0..x.rows() {
                        let s: f64 = x.row(i).iter().sum();
                        let inner = crate::ad::matrix::dot(g.row(i), y.row(i));
                        for (o, &gv) in d.row_mut(i).iter_mut().zip(g.row(i)) {
                            *o = (gv - inner) / s;
                        }
                    }
                    send(*a, d);
                }
                Op::LnClamped(a, floor) => {
                    let floor = *floor;
                    send(
                        *a,
                        g.zip_map(val(*a), |gv, x| if x > floor { gv / x } else { 0.0 })?,
                    );
                }
                Op::SumRows(a) => {
                    let (r, c) = val(*a).shape();
                    send(*a, Matrix::from_fn(r, c, |i, _| g[(i, 0)]));
                }
                Op::SumCols(a) => {
                    let (r, c) = val(*a).shape();
                    send(*a, Matrix::from_fn(r, c, |_, j| g[(0, j)]));
                }
                Op::SparseTMatMul(s, x) => send(*x, s.matmul_dense(&g)?),
                Op::Mean(xs) => {
                    let d = g.scale(1.0 / xs.len() as f64);
                    for &x in xs {
                        send(x, d.clone());
                    }
                }
                Op::ScaleRows(a, w) => {
                    let mut d = g;
                    for (i, &wi) in w.iter().enumerate() {
                        for x in d.row_mut(i) {
                            *x *= wi;
                        }
                    }
                    send(*a, d);
                }
            }
        }

        let mut by_leaf = HashMap::new();
        for (idx, node) in nodes.iter().enumerate() {
            if node.is_param {
                let g = grads
                    .get_mut(idx)
                    .and_then(Option::take)
                    .unwrap_or_else(|| Matrix::zeros(node.value.rows(), node.value.cols()));
                by_leaf.insert(Var(idx), g);
            }
        }
        Ok(Gradients { by_leaf })
    }
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax on plain values.
pub fn softmax_rows(a: &Matrix) -> Matrix {
    let mut out = a.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            total += *x;
        }
        for x in row.iter_mut() {
            *x /= total;
        }
    }
    out
}
