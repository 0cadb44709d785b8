//! Small dense and sparse matrix types plus a Cholesky solver.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::ShapeMismatch { op: "matrix", lhs: vec![rows, cols], rhs: vec![data.len()] });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Stacks equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Data(format!("row {i} has {} columns, expected {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |i| self.data[i * self.cols + j])
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                op: "matrix product",
                lhs: vec![self.rows, self.cols],
                rhs: vec![other.rows, other.cols],
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        crate::nn::tensor::gemm_acc(&self.data, &other.data, &mut out.data, self.rows, self.cols, other.cols);
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::ShapeMismatch { op: "matvec", lhs: vec![self.rows, self.cols], rhs: vec![v.len()] });
        }
        Ok((0..self.rows).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect())
    }

    /// `XᵀX`, exploiting symmetry.
    pub fn gram(&self) -> Matrix {
        let d = self.cols;
        let mut g = Matrix::zeros(d, d);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..d {
                let xi = row[i];
                if xi == 0.0 {
                    continue;
                }
                for j in i..d {
                    g.data[i * d + j] += xi * row[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                g.data[i * d + j] = g.data[j * d + i];
            }
        }
        g
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite
/// matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Fails when a pivot is not strictly positive; the message reports the
    /// failing pivot and the ratio of the largest diagonal entry to it.
    pub fn factor(a: &Matrix) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::ShapeMismatch { op: "cholesky", lhs: vec![a.rows(), a.cols()], rhs: vec![n, n] });
        }
        let max_diag = (0..n).map(|i| a[(i, i)].abs()).fold(0.0f64, f64::max);
        let tol = max_diag * (n.max(1) as f64) * f64::EPSILON;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > tol) {
                let ratio = if d > 0.0 { max_diag / d } else { f64::INFINITY };
                return Err(Error::Singular(format!(
                    "pivot {j} is {d:.3e} (max diagonal {max_diag:.3e}, condition estimate {ratio:.3e})"
                )));
            }
            let d = libm::sqrt(d);
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Ok(Cholesky { n, lower: l })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::ShapeMismatch { op: "cholesky solve", lhs: vec![n], rhs: vec![b.len()] });
        }
        let l = &self.lower;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[k * n + i] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        Ok(y)
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// explicit zeros are kept out.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|(r, c, _)| *r >= rows || *c >= cols) {
            return Err(Error::Usage(format!("triplet ({r}, {c}) outside {rows}x{cols}")));
        }
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("previous triplet") += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        let mut m = SparseMatrix { rows, cols, indptr, indices, values };
        m.prune_zeros();
        Ok(m)
    }

    fn prune_zeros(&mut self) {
        if self.values.iter().all(|v| *v != 0.0) {
            return;
        }
        let mut indptr = vec![0; self.rows + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    pub fn from_dense(m: &Matrix) -> Self {
        let mut t = Vec::new();
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                if m[(i, j)] != 0.0 {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.rows(), m.cols(), t).expect("indices in range")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    /// Exact symmetry check.
    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && self.triplets().all(|(r, c, v)| self.get(c, r) == v)
    }

    /// Submatrix made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<SparseMatrix> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for &r in rows {
            if r >= self.rows {
                return Err(Error::Usage(format!("row {r} outside matrix with {} rows", self.rows)));
            }
            for (c, v) in self.row(r) {
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Ok(SparseMatrix { rows: rows.len(), cols: self.cols, indptr, indices, values })
    }

    /// Submatrix on `rows` (any order) and `cols` (strictly increasing);
    /// kept columns are renumbered `0..cols.len()`.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Result<SparseMatrix> {
        if cols.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Usage("selected columns must be strictly increasing".into()));
        }
        if let Some(&c) = cols.last().filter(|&&c| c >= self.cols) {
            return Err(Error::Usage(format!("column {c} outside matrix with {} columns", self.cols)));
        }
        let by_rows = self.select_rows(rows)?;
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for r in 0..by_rows.rows {
            for (c, v) in by_rows.row(r) {
                if let Ok(k) = cols.binary_search(&c) {
                    indices.push(k);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(SparseMatrix { rows: rows.len(), cols: cols.len(), indptr, indices, values })
    }

    /// `out[rows×n] += self · dense[cols×n]`.
    pub(crate) fn spmm_acc(&self, dense: &[f64], n: usize, out: &mut [f64]) {
        for r in 0..self.rows {
            let orow = &mut out[r * n..(r + 1) * n];
            for (c, v) in self.row(r) {
                for (o, d) in orow.iter_mut().zip(&dense[c * n..(c + 1) * n]) {
                    *o += v * d;
                }
            }
        }
    }

    /// `out[cols×n] += selfᵀ · g[rows×n]`.
    pub(crate) fn spmm_t_acc(&self, g: &[f64], n: usize, out: &mut [f64]) {
        for r in 0..self.rows {
            let grow = &g[r * n..(r + 1) * n];
            for (c, v) in self.row(r) {
                for (o, gv) in out[c * n..(c + 1) * n].iter_mut().zip(grow) {
                    *o += v * gv;
                }
            }
        }
    }
}
