//! Reverse-mode gradient tape.
//!
//! Nodes are appended in evaluation order, so the node list is already a
//! topological order and the reverse pass is a single backwards sweep.
//! Every op validates shapes eagerly and returns [`Error::ShapeMismatch`]
//! naming both operand shapes.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::param::{ParamId, ParamSet};
use super::tensor::{gemm_acc, gemm_nt_acc, gemm_tn_acc, Tensor};
use crate::error::{usage, Error, Result};
use crate::linalg::SparseMatrix;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
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
    AddBias(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    MulConst(Var, Arc<Vec<f64>>),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Reshape(Var),
    SliceCols(Var, usize, usize),
    SliceRows(Var, usize, usize),
    GatherRows(Var, Vec<usize>),
    SpMM(Arc<SparseMatrix>, Var),
    Sum(Var),
    Mean(Var),
    Mse(Var, Vec<f64>),
    SoftmaxRows(Var),
    BatchMatVec(Var, Var),
    RouteSum(Var, Var),
    SquashRows(Var),
    Agreement(Var, Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    needs_grad: bool,
    grad: Option<Vec<f64>>,
    param: Option<ParamId>,
}

/// Records tensor operations for reverse-mode differentiation. A tape is
/// used by one thread for one forward/backward pass and then dropped.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::ShapeMismatch { op, lhs: a.shape().to_vec(), rhs: b.shape().to_vec() }
}

/// Largest f64 below one.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Logistic function kept strictly inside `(0, 1)`: f64 would otherwise
/// round large logits to exactly 0 or 1.
pub(crate) fn sigmoid(x: f64) -> f64 {
    let y = if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    };
    y.clamp(f64::MIN_POSITIVE, BELOW_ONE)
}

pub(crate) fn squash_factor(norm_sq: f64) -> f64 {
    // ‖s‖²/(1+‖s‖²) · 1/‖s‖ = ‖s‖/(1+‖s‖²)
    if norm_sq == 0.0 {
        0.0
    } else {
        libm::sqrt(norm_sq) / (1.0 + norm_sq)
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

    fn push(&mut self, value: Tensor, op: Op, parents: &[Var]) -> Var {
        let needs_grad = parents.iter().any(|p| self.nodes[p.0].needs_grad);
        self.nodes.push(Node { value, op, requires_grad: false, needs_grad, grad: None, param: None });
        Var(self.nodes.len() - 1)
    }

    /// Leaf node. Gradients are accumulated on leaves created with
    /// `requires_grad = true`.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
            needs_grad: requires_grad,
            grad: None,
            param: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// Identity node that always takes part in differentiation, so
    /// [`Tape::grad_of`] can reach it even when `a` is constant. Must be
    /// created before the nodes that consume it.
    pub fn watch(&mut self, a: Var) -> Var {
        let v = self.push(self.value(a).clone(), Op::Reshape(a), &[a]);
        self.nodes[v.0].needs_grad = true;
        v
    }

    /// Constant leaf.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// Copies a parameter onto the tape as a tracked leaf.
    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> Var {
        let v = self.leaf(params.value(id).clone(), true);
        self.nodes[v.0].param = Some(id);
        v
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Gradient accumulated on a leaf by [`Tape::backward`].
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn zero_grads(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    pub(crate) fn param_grads(&self) -> impl Iterator<Item = (ParamId, &[f64])> {
        self.nodes.iter().filter_map(|n| Some((n.param?, n.grad.as_deref()?)))
    }

    fn dims2(&self, v: Var, op: &'static str) -> Result<(usize, usize)> {
        let t = self.value(v);
        match t.shape() {
            [r, c] => Ok((*r, *c)),
            _ => Err(Error::ShapeMismatch { op, lhs: t.shape().to_vec(), rhs: vec![] }),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims2(a, "matmul")?;
        let (k2, n) = self.dims2(b, "matmul")?;
        if k != k2 {
            return Err(mismatch("matmul", self.value(a), self.value(b)));
        }
        let mut out = vec![0.0; m * n];
        gemm_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        Ok(self.push(Tensor::new(&[m, n], out)?, Op::MatMul(a, b), &[a, b]))
    }

    fn zip_same(&mut self, a: Var, b: Var, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch(op, ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| f(*x, *y)).collect();
        Tensor::new(ta.shape(), data)
    }

    /// Elementwise sum of equal shapes, or a rank-2 `[m,n]` plus a rank-1
    /// `[n]` bias broadcast over rows.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() == 2 && sb.len() == 1 && sa[1] == sb[0] {
            let bias = self.value(b).data().to_vec();
            let mut data = self.value(a).data().to_vec();
            for row in data.chunks_mut(sa[1]) {
                row.iter_mut().zip(&bias).for_each(|(x, b)| *x += b);
            }
            return Ok(self.push(Tensor::new(&sa, data)?, Op::AddBias(a, b), &[a, b]));
        }
        let t = self.zip_same(a, b, "add", |x, y| x + y)?;
        Ok(self.push(t, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same(a, b, "sub", |x, y| x - y)?;
        Ok(self.push(t, Op::Sub(a, b), &[a, b]))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same(a, b, "mul", |x, y| x * y)?;
        Ok(self.push(t, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let t = self.value(a);
        let data = t.data().iter().map(|x| x * k).collect();
        let t = Tensor::new(t.shape(), data).expect("same shape");
        self.push(t, Op::Scale(a, k), &[a])
    }

    /// Elementwise product with a constant of the same length.
    pub fn mul_const(&mut self, a: Var, factors: Arc<Vec<f64>>) -> Result<Var> {
        let t = self.value(a);
        if t.len() != factors.len() {
            return Err(Error::ShapeMismatch { op: "mul_const", lhs: t.shape().to_vec(), rhs: vec![factors.len()] });
        }
        let data = t.data().iter().zip(factors.iter()).map(|(x, f)| x * f).collect();
        let t = Tensor::new(t.shape(), data)?;
        Ok(self.push(t, Op::MulConst(a, factors), &[a]))
    }

    fn map(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let t = self.value(a);
        let data = t.data().iter().map(|x| f(*x)).collect();
        let t = Tensor::new(t.shape(), data).expect("same shape");
        self.push(t, op, &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, Op::Relu(a), |x| if x > 0.0 { x } else { 0.0 })
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, Op::Tanh(a), libm::tanh)
    }

    /// Concatenates along the last axis. Rank-1 inputs give a rank-1 result;
    /// rank-2 inputs must share their row count.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| usage("concat of zero tensors"))?;
        let rank = self.value(first).rank();
        let rows = if rank == 2 { self.shape(first)[0] } else { 1 };
        if rank != 1 && rank != 2 {
            return Err(Error::ShapeMismatch { op: "concat_cols", lhs: self.shape(first).to_vec(), rhs: vec![] });
        }
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let t = self.value(p);
            let ok = t.rank() == rank && (rank == 1 || t.shape()[0] == rows);
            if !ok {
                return Err(mismatch("concat_cols", self.value(first), t));
            }
            widths.push(*t.shape().last().expect("rank >= 1"));
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[r * w..(r + 1) * w]);
            }
        }
        let shape = if rank == 1 { vec![total] } else { vec![rows, total] };
        Ok(self.push(Tensor::new(&shape, data)?, Op::ConcatCols(parts.to_vec()), parts))
    }

    /// Stacks rank-2 tensors (or rank-1 rows) with equal widths vertically.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| usage("concat of zero tensors"))?;
        let (_, cols) = self.value(first).as_matrix_dims();
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.rank() > 2 || t.rank() == 0 || t.as_matrix_dims().1 != cols {
                return Err(mismatch("concat_rows", self.value(first), t));
            }
            rows += t.as_matrix_dims().0;
            data.extend_from_slice(t.data());
        }
        Ok(self.push(Tensor::new(&[rows, cols], data)?, Op::ConcatRows(parts.to_vec()), parts))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(a).clone().reshape(shape)?;
        Ok(self.push(t, Op::Reshape(a), &[a]))
    }

    /// Columns `start..end` of a rank-2 tensor.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (m, n) = self.dims2(a, "slice_cols")?;
        if start >= end || end > n {
            return Err(usage(alloc::format!("column slice {start}..{end} of width {n}")));
        }
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(m * (end - start));
        for r in 0..m {
            data.extend_from_slice(&src[r * n + start..r * n + end]);
        }
        Ok(self.push(Tensor::new(&[m, end - start], data)?, Op::SliceCols(a, start, end), &[a]))
    }

    /// Rows `start..end` of a rank-2 tensor.
    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (m, n) = self.dims2(a, "slice_rows")?;
        if start >= end || end > m {
            return Err(usage(alloc::format!("row slice {start}..{end} of height {m}")));
        }
        let data = self.value(a).data()[start * n..end * n].to_vec();
        Ok(self.push(Tensor::new(&[end - start, n], data)?, Op::SliceRows(a, start, end), &[a]))
    }

    /// Rows picked by index (embedding lookup); indices may repeat.
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let (m, n) = self.dims2(a, "gather_rows")?;
        if indices.is_empty() {
            return Err(usage("gather of zero rows"));
        }
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            if i >= m {
                return Err(usage(alloc::format!("row index {i} out of {m}")));
            }
            data.extend_from_slice(&src[i * n..(i + 1) * n]);
        }
        Ok(self.push(Tensor::new(&[indices.len(), n], data)?, Op::GatherRows(a, indices.to_vec()), &[a]))
    }

    /// Constant sparse matrix times a rank-2 tensor.
    pub fn spmm(&mut self, s: Arc<SparseMatrix>, b: Var) -> Result<Var> {
        let (k, n) = self.dims2(b, "spmm")?;
        if s.cols() != k {
            return Err(Error::ShapeMismatch { op: "spmm", lhs: vec![s.rows(), s.cols()], rhs: vec![k, n] });
        }
        let mut out = vec![0.0; s.rows() * n];
        s.spmm_acc(self.value(b).data(), n, &mut out);
        let t = Tensor::new(&[s.rows(), n], out)?;
        Ok(self.push(t, Op::SpMM(s, b), &[b]))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push(Tensor::scalar(s), Op::Mean(a), &[a])
    }

    /// Mean squared difference against constant targets of equal length.
    pub fn mse(&mut self, pred: Var, gold: &[f64]) -> Result<Var> {
        let t = self.value(pred);
        if t.len() != gold.len() || gold.is_empty() {
            return Err(Error::ShapeMismatch { op: "mse", lhs: t.shape().to_vec(), rhs: vec![gold.len()] });
        }
        let s = t.data().iter().zip(gold).map(|(p, g)| (p - g) * (p - g)).sum::<f64>() / gold.len() as f64;
        Ok(self.push(Tensor::scalar(s), Op::Mse(pred, gold.to_vec()), &[pred]))
    }

    /// Row-wise softmax of a rank-2 tensor.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.dims2(a, "softmax_rows")?;
        let mut data = self.value(a).data().to_vec();
        for row in data.chunks_mut(n) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for x in row.iter_mut() {
                *x = libm::exp(*x - max);
                z += *x;
            }
            row.iter_mut().for_each(|x| *x /= z);
        }
        Ok(self.push(Tensor::new(&[m, n], data)?, Op::SoftmaxRows(a), &[a]))
    }

    /// Batched matrix-vector product: `w[b,m,k] · x[b,k] → [b,m]`.
    pub fn batch_matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let (tw, tx) = (self.value(w), self.value(x));
        let (b, m, k) = match tw.shape() {
            [b, m, k] => (*b, *m, *k),
            _ => return Err(mismatch("batch_matvec", tw, tx)),
        };
        if tx.shape() != [b, k] {
            return Err(mismatch("batch_matvec", tw, tx));
        }
        let (wd, xd) = (tw.data(), tx.data());
        let mut out = vec![0.0; b * m];
        for i in 0..b {
            let xi = &xd[i * k..(i + 1) * k];
            for r in 0..m {
                let wr = &wd[(i * m + r) * k..(i * m + r + 1) * k];
                out[i * m + r] = wr.iter().zip(xi).map(|(p, q)| p * q).sum();
            }
        }
        Ok(self.push(Tensor::new(&[b, m], out)?, Op::BatchMatVec(w, x), &[w, x]))
    }

    /// Coupling-weighted sum over input capsules:
    /// `s[j,:] = Σᵢ c[i,j] · u[i,j,:]` with `c: [n,J]`, `u: [n,J,D]`.
    pub fn route_sum(&mut self, c: Var, u: Var) -> Result<Var> {
        let (tc, tu) = (self.value(c), self.value(u));
        let (n, j, d) = match tu.shape() {
            [n, j, d] => (*n, *j, *d),
            _ => return Err(mismatch("route_sum", tc, tu)),
        };
        if tc.shape() != [n, j] {
            return Err(mismatch("route_sum", tc, tu));
        }
        let (cd, ud) = (tc.data(), tu.data());
        let mut out = vec![0.0; j * d];
        for i in 0..n {
            for jj in 0..j {
                let cij = cd[i * j + jj];
                let src = &ud[(i * j + jj) * d..(i * j + jj + 1) * d];
                for (o, x) in out[jj * d..(jj + 1) * d].iter_mut().zip(src) {
                    *o += cij * x;
                }
            }
        }
        Ok(self.push(Tensor::new(&[j, d], out)?, Op::RouteSum(c, u), &[c, u]))
    }

    /// Capsule squash applied to each row: `‖s‖²/(1+‖s‖²) · s/‖s‖`, with
    /// zero rows mapped to zero.
    pub fn squash_rows(&mut self, s: Var) -> Result<Var> {
        let (m, n) = self.dims2(s, "squash_rows")?;
        let mut data = self.value(s).data().to_vec();
        for row in data.chunks_mut(n) {
            let f = squash_factor(row.iter().map(|x| x * x).sum());
            row.iter_mut().for_each(|x| *x *= f);
        }
        Ok(self.push(Tensor::new(&[m, n], data)?, Op::SquashRows(s), &[s]))
    }

    /// Agreement logits `a[i,j] = u[i,j,:] · v[j,:]`.
    pub fn agreement(&mut self, u: Var, v: Var) -> Result<Var> {
        let (tu, tv) = (self.value(u), self.value(v));
        let (n, j, d) = match tu.shape() {
            [n, j, d] => (*n, *j, *d),
            _ => return Err(mismatch("agreement", tu, tv)),
        };
        if tv.shape() != [j, d] {
            return Err(mismatch("agreement", tu, tv));
        }
        let (ud, vd) = (tu.data(), tv.data());
        let mut out = vec![0.0; n * j];
        for i in 0..n {
            for jj in 0..j {
                let a = &ud[(i * j + jj) * d..(i * j + jj + 1) * d];
                out[i * j + jj] = a.iter().zip(&vd[jj * d..(jj + 1) * d]).map(|(x, y)| x * y).sum();
            }
        }
        Ok(self.push(Tensor::new(&[n, j], out)?, Op::Agreement(u, v), &[u, v]))
    }

    /// Reverse sweep from `loss`, returning a gradient slot per node (only
    /// nodes on a path to a tracked leaf are filled).
    /// Nodes below `floor` are not visited.
    fn reverse(&self, loss: Var, floor: usize) -> Result<Vec<Option<Vec<f64>>>> {
        let t = self.value(loss);
        if t.len() != 1 {
            return Err(usage(alloc::format!("backward from non-scalar of shape {:?}", t.shape())));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        for i in (floor..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].needs_grad {
                continue;
            }
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(grads)
    }

    /// Accumulates `∂loss/∂leaf` into every leaf created with
    /// `requires_grad`. Repeated calls keep accumulating until
    /// [`Tape::zero_grads`].
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let grads = self.reverse(loss, 0)?;
        for (node, g) in self.nodes.iter_mut().zip(grads) {
            if !node.requires_grad {
                continue;
            }
            if let Some(g) = g {
                match &mut node.grad {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                    None => node.grad = Some(g),
                }
            }
        }
        Ok(())
    }

    /// Gradients of `loss` with respect to arbitrary nodes, without touching
    /// leaf accumulators. Nodes off the differentiable path get zeros.
    pub fn grad_of(&self, loss: Var, wrt: &[Var]) -> Result<Vec<Tensor>> {
        // Nothing below the earliest requested node can contribute.
        let floor = wrt.iter().map(|v| v.0).min().unwrap_or(0);
        let grads = self.reverse(loss, floor)?;
        Ok(wrt
            .iter()
            .map(|v| {
                let shape = self.shape(*v);
                match grads.get(v.0).and_then(Option::as_ref) {
                    Some(g) => Tensor::new(shape, g.clone()).expect("gradient matches value shape"),
                    None => Tensor::zeros(shape),
                }
            })
            .collect())
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let out = node.value.data();
        // Lazily allocates the parent slot and hands it to `f`.
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            let p = &self.nodes[v.0];
            if !p.needs_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; p.value.len()]);
            f(slot);
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.value(*a).as_matrix_dims();
                let n = self.value(*b).as_matrix_dims().1;
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &mut |s| gemm_nt_acc(g, bd, s, m, k, n));
                acc(*b, &mut |s| gemm_tn_acc(ad, g, s, m, k, n));
            }
            Op::Add(a, b) => {
                acc(*a, &mut |s| s.iter_mut().zip(g).for_each(|(x, y)| *x += y));
                acc(*b, &mut |s| s.iter_mut().zip(g).for_each(|(x, y)| *x += y));
            }
            Op::AddBias(a, b) => {
                acc(*a, &mut |s| s.iter_mut().zip(g).for_each(|(x, y)| *x += y));
                let n = self.value(*b).len();
                acc(*b, &mut |s| {
                    for row in g.chunks(n) {
                        s.iter_mut().zip(row).for_each(|(x, y)| *x += y);
                    }
                });
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |s| s.iter_mut().zip(g).for_each(|(x, y)| *x += y));
                acc(*b, &mut |s| s.iter_mut().zip(g).for_each(|(x, y)| *x -= y));
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &mut |s| {
                    for ((x, gy), bv) in s.iter_mut().zip(g).zip(bd) {
                        *x += gy * bv;
                    }
                });
                acc(*b, &mut |s| {
                    for ((x, gy), av) in s.iter_mut().zip(g).zip(ad) {
                        *x += gy * av;
                    }
                });
            }
            Op::Scale(a, k) => acc(*a, &mut |s| s.iter_mut().zip(g).for_each(|(x, y)| *x += k * y)),
            Op::MulConst(a, f) => acc(*a, &mut |s| {
                for ((x, gy), fv) in s.iter_mut().zip(g).zip(f.iter()) {
                    *x += gy * fv;
                }
            }),
            Op::Relu(a) => acc(*a, &mut |s| {
                for ((x, gy), o) in s.iter_mut().zip(g).zip(out) {
                    if *o > 0.0 {
                        *x += gy;
                    }
                }
            }),
            Op::Sigmoid(a) => acc(*a, &mut |s| {
                for ((x, gy), o) in s.iter_mut().zip(g).zip(out) {
                    *x += gy * o * (1.0 - o);
                }
            }),
            Op::Tanh(a) => acc(*a, &mut |s| {
                for ((x, gy), o) in s.iter_mut().zip(g).zip(out) {
                    *x += gy * (1.0 - o * o);
                }
            }),
            Op::ConcatCols(parts) => {
                let rows = node.value.as_matrix_dims().0;
                let total = node.value.as_matrix_dims().1;
                let mut offset = 0;
                for p in parts {
                    let w = self.value(*p).as_matrix_dims().1;
                    acc(*p, &mut |s| {
                        for r in 0..rows {
                            let src = &g[r * total + offset..r * total + offset + w];
                            s[r * w..(r + 1) * w].iter_mut().zip(src).for_each(|(x, y)| *x += y);
                        }
                    });
                    offset += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let len = self.value(*p).len();
                    acc(*p, &mut |s| s.iter_mut().zip(&g[offset..offset + len]).for_each(|(x, y)| *x += y));
                    offset += len;
                }
            }
            Op::Reshape(a) => acc(*a, &mut |s| s.iter_mut().zip(g).for_each(|(x, y)| *x += y)),
            Op::SliceCols(a, start, end) => {
                let (m, n) = self.value(*a).as_matrix_dims();
                let w = end - start;
                acc(*a, &mut |s| {
                    for r in 0..m {
                        let dst = &mut s[r * n + start..r * n + end];
                        dst.iter_mut().zip(&g[r * w..(r + 1) * w]).for_each(|(x, y)| *x += y);
                    }
                });
            }
            Op::SliceRows(a, start, end) => {
                let n = self.value(*a).as_matrix_dims().1;
                acc(*a, &mut |s| s[start * n..end * n].iter_mut().zip(g).for_each(|(x, y)| *x += y));
            }
            Op::GatherRows(a, idx) => {
                let n = self.value(*a).as_matrix_dims().1;
                acc(*a, &mut |s| {
                    for (r, &i) in idx.iter().enumerate() {
                        s[i * n..(i + 1) * n].iter_mut().zip(&g[r * n..(r + 1) * n]).for_each(|(x, y)| *x += y);
                    }
                });
            }
            Op::SpMM(sp, b) => {
                let n = self.value(*b).as_matrix_dims().1;
                acc(*b, &mut |s| sp.spmm_t_acc(g, n, s));
            }
            Op::Sum(a) => acc(*a, &mut |s| s.iter_mut().for_each(|x| *x += g[0])),
            Op::Mean(a) => {
                let n = self.value(*a).len() as f64;
                acc(*a, &mut |s| s.iter_mut().for_each(|x| *x += g[0] / n));
            }
            Op::Mse(p, gold) => {
                let pd = self.value(*p).data();
                let n = gold.len() as f64;
                acc(*p, &mut |s| {
                    for ((x, pv), gv) in s.iter_mut().zip(pd).zip(gold) {
                        *x += g[0] * 2.0 * (pv - gv) / n;
                    }
                });
            }
            Op::SoftmaxRows(a) => {
                let n = node.value.as_matrix_dims().1;
                acc(*a, &mut |s| {
                    for ((srow, grow), yrow) in s.chunks_mut(n).zip(g.chunks(n)).zip(out.chunks(n)) {
                        let dot: f64 = grow.iter().zip(yrow).map(|(x, y)| x * y).sum();
                        for ((x, gy), y) in srow.iter_mut().zip(grow).zip(yrow) {
                            *x += y * (gy - dot);
                        }
                    }
                });
            }
            Op::BatchMatVec(w, x) => {
                let (b, m, k) = match self.shape(*w) {
                    [b, m, k] => (*b, *m, *k),
                    _ => unreachable!("checked in forward"),
                };
                let (wd, xd) = (self.value(*w).data(), self.value(*x).data());
                acc(*w, &mut |s| {
                    for i in 0..b {
                        for r in 0..m {
                            let gv = g[i * m + r];
                            let dst = &mut s[(i * m + r) * k..(i * m + r + 1) * k];
                            dst.iter_mut().zip(&xd[i * k..(i + 1) * k]).for_each(|(d, xv)| *d += gv * xv);
                        }
                    }
                });
                acc(*x, &mut |s| {
                    for i in 0..b {
                        for r in 0..m {
                            let gv = g[i * m + r];
                            let wr = &wd[(i * m + r) * k..(i * m + r + 1) * k];
                            s[i * k..(i + 1) * k].iter_mut().zip(wr).for_each(|(d, wv)| *d += gv * wv);
                        }
                    }
                });
            }
            Op::RouteSum(c, u) => {
                let (n, j, d) = match self.shape(*u) {
                    [n, j, d] => (*n, *j, *d),
                    _ => unreachable!("checked in forward"),
                };
                let (cd, ud) = (self.value(*c).data(), self.value(*u).data());
                acc(*c, &mut |s| {
                    for i in 0..n {
                        for jj in 0..j {
                            let urow = &ud[(i * j + jj) * d..(i * j + jj + 1) * d];
                            s[i * j + jj] += urow.iter().zip(&g[jj * d..(jj + 1) * d]).map(|(a, b)| a * b).sum::<f64>();
                        }
                    }
                });
                acc(*u, &mut |s| {
                    for i in 0..n {
                        for jj in 0..j {
                            let cij = cd[i * j + jj];
                            let dst = &mut s[(i * j + jj) * d..(i * j + jj + 1) * d];
                            dst.iter_mut().zip(&g[jj * d..(jj + 1) * d]).for_each(|(x, y)| *x += cij * y);
                        }
                    }
                });
            }
            Op::SquashRows(a) => {
                let n = node.value.as_matrix_dims().1;
                let src = self.value(*a).data();
                acc(*a, &mut |s| {
                    for ((srow, grow), xrow) in s.chunks_mut(n).zip(g.chunks(n)).zip(src.chunks(n)) {
                        let nsq: f64 = xrow.iter().map(|x| x * x).sum();
                        if nsq == 0.0 {
                            continue;
                        }
                        let norm = libm::sqrt(nsq);
                        let f = norm / (1.0 + nsq);
                        // d f(‖s‖)/d‖s‖ divided by ‖s‖
                        let fprime_over_norm = (1.0 - nsq) / ((1.0 + nsq) * (1.0 + nsq)) / norm;
                        let dot: f64 = xrow.iter().zip(grow).map(|(x, y)| x * y).sum();
                        for ((d, gy), x) in srow.iter_mut().zip(grow).zip(xrow) {
                            *d += f * gy + fprime_over_norm * dot * x;
                        }
                    }
                });
            }
            Op::Agreement(u, v) => {
                let (n, j, d) = match self.shape(*u) {
                    [n, j, d] => (*n, *j, *d),
                    _ => unreachable!("checked in forward"),
                };
                let (ud, vd) = (self.value(*u).data(), self.value(*v).data());
                acc(*u, &mut |s| {
                    for i in 0..n {
                        for jj in 0..j {
                            let gv = g[i * j + jj];
                            let dst = &mut s[(i * j + jj) * d..(i * j + jj + 1) * d];
                            dst.iter_mut().zip(&vd[jj * d..(jj + 1) * d]).for_each(|(x, y)| *x += gv * y);
                        }
                    }
                });
                acc(*v, &mut |s| {
                    for i in 0..n {
                        for jj in 0..j {
                            let gv = g[i * j + jj];
                            let src = &ud[(i * j + jj) * d..(i * j + jj + 1) * d];
                            s[jj * d..(jj + 1) * d].iter_mut().zip(src).for_each(|(x, y)| *x += gv * y);
                        }
                    }
                });
            }
        }
    }
}
