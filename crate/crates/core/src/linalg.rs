//! Small dense linear algebra kernels.
//!
//! Everything here works on row-major `f64` storage. The problem sizes this
//! crate targets (NL up to a few thousand) do not justify a BLAS dependency,
//! and keeping the kernels local lets the crate stay `no_std`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::LinalgError;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major data. Returns `None` on a length mismatch.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == rows * cols).then_some(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; `None` if the rows are ragged.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Option<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n * m);
        for r in rows {
            let r = r.as_ref();
            if r.len() != m {
                return None;
            }
            data.extend_from_slice(r);
        }
        Some(Self { rows: n, cols: m, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (o, v) in out.iter_mut().zip(self.row(i)) {
                *o += v;
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &aik) in self.row(i).iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                axpy(aik, rhs.row(k), orow);
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "mul_vec shape mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn add(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape());
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape());
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest absolute entrywise difference; panics on a shape mismatch.
    pub fn max_abs_diff(&self, rhs: &Matrix) -> f64 {
        assert_eq!(self.shape(), rhs.shape());
        self.data
            .iter()
            .zip(&rhs.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Frobenius norm.
    pub fn norm_fro(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v * v).sum())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// y += a * x
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn norm2(x: &[f64]) -> f64 {
    libm::sqrt(dot(x, x))
}

/// Dense Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    Matrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    /// Factorizes a symmetric matrix. Only the lower triangle is read.
    pub fn new(a: &Matrix) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        let n = a.rows();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            d -= dot(&l.row(j)[..j], &l.row(j)[..j]);
            if !(d > 0.0) || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { pivot: j, value: d });
            }
            let ljj = libm::sqrt(d);
            l[(j, j)] = ljj;
            for i in j + 1..n {
                let s = a[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { l })
    }

    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    /// Squared diagonal of `L`: the pivots of the equivalent `LDLᵀ` factorization.
    pub fn pivots(&self) -> Vec<f64> {
        (0..self.l.rows()).map(|i| self.l[(i, i)] * self.l[(i, i)]).collect()
    }

    pub fn log_det(&self) -> f64 {
        (0..self.l.rows()).map(|i| 2.0 * libm::log(self.l[(i, i)])).sum()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for i in 0..n {
            let s = x[i] - dot(&self.l.row(i)[..i], &x[..i]);
            x[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.l.rows();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        // symmetrize away round-off
        for i in 0..n {
            for j in 0..i {
                let m = 0.5 * (inv[(i, j)] + inv[(j, i)]);
                inv[(i, j)] = m;
                inv[(j, i)] = m;
            }
        }
        inv
    }
}

/// Gauss-Jordan inverse with partial pivoting, for general square matrices.
pub fn gauss_jordan_inverse(a: &Matrix) -> Result<Matrix, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut inv = Matrix::identity(n);
    for col in 0..n {
        let (piv, pval) =
            (col..n)
                .map(|r| (r, m[(r, col)].abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pval == 0.0 || !pval.is_finite() {
            return Err(LinalgError::Singular { pivot: col });
        }
        if piv != col {
            swap_rows(&mut m, piv, col);
            swap_rows(&mut inv, piv, col);
        }
        let d = m[(col, col)];
        m.row_mut(col).iter_mut().for_each(|v| *v /= d);
        inv.row_mut(col).iter_mut().for_each(|v| *v /= d);
        let prow = m.row(col).to_vec();
        let pinv = inv.row(col).to_vec();
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[(r, col)];
            if f != 0.0 {
                axpy(-f, &prow, m.row_mut(r));
                axpy(-f, &pinv, inv.row_mut(r));
            }
        }
    }
    Ok(inv)
}

fn swap_rows(m: &mut Matrix, a: usize, b: usize) {
    if a == b {
        return;
    }
    let cols = m.cols();
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let (head, tail) = m.as_mut_slice().split_at_mut(hi * cols);
    head[lo * cols..(lo + 1) * cols].swap_with_slice(&mut tail[..cols]);
}

/// Determinant summary from an LU factorization with partial pivoting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Determinant {
    /// Signed determinant (may under/overflow for large matrices).
    pub value: f64,
    /// `|det| / Π‖row_k‖₂`, in `[0, 1]` by Hadamard's inequality.
    pub hadamard_ratio: f64,
}

pub fn determinant(a: &Matrix) -> Result<Determinant, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    let mut log_rows = 0.0;
    for i in 0..n {
        let r = norm2(a.row(i));
        if r == 0.0 {
            return Ok(Determinant {
                value: 0.0,
                hadamard_ratio: 0.0,
            });
        }
        log_rows += libm::log(r);
    }
    let mut m = a.clone();
    let mut sign = 1.0;
    let mut log_abs = 0.0;
    for col in 0..n {
        let (piv, pval) =
            (col..n)
                .map(|r| (r, m[(r, col)].abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pval == 0.0 {
            return Ok(Determinant {
                value: 0.0,
                hadamard_ratio: 0.0,
            });
        }
        if piv != col {
            swap_rows(&mut m, piv, col);
            sign = -sign;
        }
        let d = m[(col, col)];
        if d < 0.0 {
            sign = -sign;
        }
        log_abs += libm::log(d.abs());
        for r in col + 1..n {
            let f = m[(r, col)] / d;
            if f != 0.0 {
                for c in col..n {
                    let v = m[(col, c)];
                    m[(r, c)] -= f * v;
                }
            }
        }
    }
    Ok(Determinant {
        value: sign * libm::exp(log_abs),
        hadamard_ratio: libm::exp(log_abs - log_rows),
    })
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues and the eigenvector matrix (columns are eigenvectors).
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix), LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..i {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if libm::sqrt(off) <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let evals = (0..n).map(|i| m[(i, i)]).collect();
    Ok((evals, v))
}

/// Minimum-norm solution of `M y = r` for symmetric positive semi-definite `M`.
///
/// Eigenvalues below `rel_tol * λ_max` are treated as zero; the returned rank
/// counts the ones kept.
pub fn pinv_solve_symmetric(m: &Matrix, r: &[f64], rel_tol: f64) -> Result<(Vec<f64>, usize), LinalgError> {
    let (evals, vecs) = symmetric_eigen(m)?;
    let n = m.rows();
    let lmax = evals.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let cut = rel_tol * lmax;
    let mut y = vec![0.0; n];
    let mut rank = 0;
    for (k, &lam) in evals.iter().enumerate() {
        if lam.abs() <= cut || lam == 0.0 {
            continue;
        }
        rank += 1;
        let mut proj = 0.0;
        for i in 0..n {
            proj += vecs[(i, k)] * r[i];
        }
        let coef = proj / lam;
        for i in 0..n {
            y[i] += coef * vecs[(i, k)];
        }
    }
    Ok((y, rank))
}

/// Largest eigenvalue of a symmetric positive semi-definite operator by power iteration.
pub fn power_iteration(n: usize, mut apply: impl FnMut(&[f64]) -> Vec<f64>, max_iter: usize, tol: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    // deterministic, non-degenerate start
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let y = apply(&x);
        let ny = norm2(&y);
        if ny == 0.0 {
            return 0.0;
        }
        let next = dot(&x, &y);
        x = y.into_iter().map(|v| v / ny).collect();
        if (next - lambda).abs() <= tol * next.abs().max(f64::MIN_POSITIVE) {
            return next;
        }
        lambda = next;
    }
    lambda
}
