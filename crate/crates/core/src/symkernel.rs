//! Dense symmetric-matrix numerics.
//!
//! [`SymMatrix`] stores the upper triangle in packed row-major order. Kernels
//! that need the full square form expand into a [`Dense`] scratch matrix.

use std::fmt;

use crate::error::{check_dim, Error, Result};
use crate::scalar::Real;

/// Sweep cap for the cyclic Jacobi eigensolver.
pub const MAX_SWEEPS: usize = 100;

#[derive(Clone, PartialEq)]
pub struct SymMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

#[inline]
fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

#[inline]
fn packed_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * n - i + 1) / 2 + (j - i)
}

impl<T: Real> SymMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); packed_len(dim)],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, T::one());
        }
        m
    }

    pub fn diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds a matrix from `f(i, j)` evaluated on the upper triangle only.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(packed_len(dim));
        for i in 0..dim {
            for j in i..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    pub fn from_packed(dim: usize, data: Vec<T>) -> Result<Self> {
        check_dim("packed symmetric storage", packed_len(dim), data.len())?;
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("symmetric matrix entries"));
        }
        Ok(Self { dim, data })
    }

    /// Builds a matrix from full square rows; the rows must be exactly symmetric.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        for row in rows {
            check_dim("square matrix row", n, row.len())?;
        }
        for i in 0..n {
            for j in 0..n {
                if !rows[i][j].is_finite() {
                    return Err(Error::NonFinite("symmetric matrix entries"));
                }
                if rows[i][j] != rows[j][i] {
                    return Err(Error::Structure(format!(
                        "matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self::from_fn(n, |i, j| rows[i][j]))
    }

    /// Rank-one matrix `u uᵀ`.
    pub fn outer(u: &[T]) -> Self {
        Self::from_fn(u.len(), |i, j| u[i] * u[j])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn packed(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[packed_index(self.dim, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        debug_assert!(v.is_finite(), "non-finite entry written at ({i}, {j})");
        let k = packed_index(self.dim, i, j);
        self.data[k] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: T) {
        let k = packed_index(self.dim, i, j);
        self.data[k] += v;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn trace(&self) -> T {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn fro_norm(&self) -> T {
        self.dot(self).max(T::zero()).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    /// Full double-sum inner product without a dimension check.
    pub(crate) fn dot(&self, other: &Self) -> T {
        let n = self.dim;
        let mut acc = T::zero();
        let two = T::lit(2.0);
        let mut k = 0;
        for i in 0..n {
            acc += self.data[k] * other.data[k];
            k += 1;
            for _ in (i + 1)..n {
                acc += two * self.data[k] * other.data[k];
                k += 1;
            }
        }
        acc
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "axpy dimension mismatch");
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + s * b)
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.axpy(T::one(), other)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-T::one(), other)
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &[T]) -> T {
        let n = self.dim;
        let mut acc = T::zero();
        for i in 0..n {
            acc += self.get(i, i) * x[i] * x[i];
            for j in (i + 1)..n {
                acc += T::lit(2.0) * self.get(i, j) * x[i] * x[j];
            }
        }
        acc
    }

    /// Principal submatrix on `idx`.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b]))
    }

    /// Embeds `self` into the top-left corner of a zero matrix of size `dim`.
    pub fn embed(&self, dim: usize) -> Self {
        assert!(dim >= self.dim);
        let mut out = Self::zeros(dim);
        for i in 0..self.dim {
            for j in i..self.dim {
                out.set(i, j, self.get(i, j));
            }
        }
        out
    }

    pub fn to_dense(&self) -> Dense<T> {
        let n = self.dim;
        let mut d = Dense::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.get(i, j);
                d[(i, j)] = v;
                d[(j, i)] = v;
            }
        }
        d
    }

    pub fn cast<U: Real>(&self) -> SymMatrix<U> {
        SymMatrix {
            dim: self.dim,
            data: self.data.iter().map(|&x| U::lit(x.as_f64())).collect(),
        }
    }

    pub fn eigen(&self, tol: T) -> Result<EigenDecomp<T>> {
        eigen(self, tol)
    }
}

impl<T: fmt::Debug> fmt::Debug for SymMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.dim;
        let rows: Vec<Vec<&T>> = (0..n)
            .map(|i| (0..n).map(|j| &self.data[packed_index(n, i, j)]).collect())
            .collect();
        f.debug_struct("SymMatrix")
            .field("dim", &self.dim)
            .field("rows", &rows)
            .finish()
    }
}

/// Row-major dense scratch matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut d = Self::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = T::one();
        }
        d
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * x[j]).sum())
            .collect()
    }

    /// `(A + Aᵀ) / 2` of a square matrix.
    pub fn symmetrize(&self) -> SymMatrix<T> {
        assert_eq!(self.rows, self.cols);
        let half = T::lit(0.5);
        SymMatrix::from_fn(self.rows, |i, j| half * (self[(i, j)] + self[(j, i)]))
    }

    /// `F Fᵀ` for a rectangular factor.
    pub fn gram_outer(&self) -> SymMatrix<T> {
        SymMatrix::from_fn(self.rows, |i, j| {
            (0..self.cols).map(|k| self[(i, k)] * self[(j, k)]).sum()
        })
    }

    /// `Fᵀ A F` for symmetric `A`.
    pub fn congruence(&self, a: &SymMatrix<T>) -> SymMatrix<T> {
        let af = a.to_dense().matmul(self);
        let r = self.cols;
        SymMatrix::from_fn(r, |i, j| {
            (0..self.rows).map(|k| self[(k, i)] * af[(k, j)]).sum()
        })
    }

    /// Full double-sum inner product with a symmetric matrix.
    pub fn dot_sym(&self, a: &SymMatrix<T>) -> T {
        let n = self.rows;
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..n {
                acc += self[(i, j)] * a.get(i, j);
            }
        }
        acc
    }

    /// Lower Cholesky factor of a symmetric positive definite matrix.
    pub fn cholesky(&self) -> Option<Self> {
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Some(l)
    }

    /// Solves `L Lᵀ x = b` given the lower Cholesky factor `self`.
    pub fn cholesky_solve(&self, b: &[T]) -> Vec<T> {
        let n = self.rows;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                let v = self[(i, k)] * y[k];
                y[i] -= v;
            }
            y[i] /= self[(i, i)];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let v = self[(k, i)] * y[k];
                y[i] -= v;
            }
            y[i] /= self[(i, i)];
        }
        y
    }

    /// Inverse of a lower-triangular matrix.
    pub fn lower_inverse(&self) -> Self {
        let n = self.rows;
        let mut inv = Self::zeros(n, n);
        for j in 0..n {
            inv[(j, j)] = T::one() / self[(j, j)];
            for i in (j + 1)..n {
                let mut s = T::zero();
                for k in j..i {
                    s += self[(i, k)] * inv[(k, j)];
                }
                inv[(i, j)] = -s / self[(i, i)];
            }
        }
        inv
    }
}

impl<T> std::ops::Index<(usize, usize)> for Dense<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Dense<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Spectral decomposition with eigenvalues sorted in descending order.
#[derive(Clone, Debug)]
pub struct EigenDecomp<T> {
    pub eigenvalues: Vec<T>,
    /// Column `k` is the unit eigenvector for `eigenvalues[k]`.
    pub eigenvectors: Dense<T>,
}

impl<T: Real> EigenDecomp<T> {
    pub fn eigenvector(&self, k: usize) -> Vec<T> {
        self.eigenvectors.column(k)
    }

    pub fn min(&self) -> T {
        self.eigenvalues.last().copied().unwrap_or_else(T::zero)
    }

    pub fn max_abs(&self) -> T {
        self.eigenvalues
            .iter()
            .fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn reconstruct(&self) -> SymMatrix<T> {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        SymMatrix::from_fn(n, |i, j| {
            (0..n)
                .map(|k| self.eigenvalues[k] * v[(i, k)] * v[(j, k)])
                .sum()
        })
    }
}

/// Default relative tolerance for [`eigen`] at the scalar's precision.
pub fn default_eigen_tol<T: Real>(dim: usize) -> T {
    T::epsilon() * T::of_usize(4 * dim.max(1))
}

/// Full eigendecomposition by cyclic Jacobi sweeps.
pub fn eigen<T: Real>(a: &SymMatrix<T>, tol: T) -> Result<EigenDecomp<T>> {
    let n = a.dim();
    let mut m = a.to_dense();
    let mut v = Dense::identity(n);
    let scale = a.fro_norm();
    let target = tol * scale;
    let eps = T::epsilon();
    let two = T::lit(2.0);

    let off = |m: &Dense<T>| -> T {
        let mut s = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                s += m[(i, j)] * m[(i, j)];
            }
        }
        (two * s).sqrt()
    };

    let mut converged = n < 2 || off(&m) <= target;
    let mut sweep = 0;
    while !converged {
        if sweep == MAX_SWEEPS {
            return Err(Error::Convergence { sweeps: MAX_SWEEPS });
        }
        sweep += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.is_zero() {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                // Negligible against both diagonal entries: annihilate directly.
                if apq.abs() <= eps * app.abs() * T::lit(0.5)
                    && apq.abs() <= eps * aqq.abs() * T::lit(0.5)
                {
                    m[(p, q)] = T::zero();
                    m[(q, p)] = T::zero();
                    continue;
                }
                let theta = (aqq - app) / (two * apq);
                let t = {
                    let t = T::one() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    if theta < T::zero() {
                        -t
                    } else {
                        t
                    }
                };
                let c = T::one() / (t * t + T::one()).sqrt();
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
                m[(p, q)] = T::zero();
                m[(q, p)] = T::zero();
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        converged = off(&m) <= target;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].partial_cmp(&m[(i, i)]).unwrap_or(std::cmp::Ordering::Equal));
    let eigenvalues = order.iter().map(|&i| m[(i, i)]).collect();
    let mut eigenvectors = Dense::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        for k in 0..n {
            eigenvectors[(k, col)] = v[(k, i)];
        }
    }
    Ok(EigenDecomp {
        eigenvalues,
        eigenvectors,
    })
}

/// `⟨A, B⟩ = Σᵢ Σⱼ Aᵢⱼ Bᵢⱼ`.
pub fn frob_inner<T: Real>(a: &SymMatrix<T>, b: &SymMatrix<T>) -> Result<T> {
    check_dim("frobenius inner product", a.dim(), b.dim())?;
    Ok(a.dot(b))
}

fn spectrum<T: Real>(a: &SymMatrix<T>) -> EigenDecomp<T> {
    // Jacobi converges for every finite symmetric input well inside the cap.
    eigen(a, default_eigen_tol(a.dim())).expect("jacobi sweep cap exceeded")
}

pub fn is_psd<T: Real>(a: &SymMatrix<T>, tol: T) -> bool {
    if a.dim() == 0 {
        return true;
    }
    let e = spectrum(a);
    e.min() >= -tol * T::one().max(a.fro_norm())
}

fn rank_threshold<T: Real>(e: &EigenDecomp<T>, tol: T) -> T {
    let big = e.max_abs();
    let floor = T::epsilon() * T::of_usize(e.eigenvalues.len().max(1)) * big;
    (tol * T::one().max(big)).max(floor)
}

pub fn numeric_rank<T: Real>(a: &SymMatrix<T>, tol: T) -> usize {
    let e = spectrum(a);
    let thr = rank_threshold(&e, tol);
    e.eigenvalues.iter().filter(|x| x.abs() > thr).count()
}

/// Factor `F` (dim × r) with `F Fᵀ ≈ a`, where `r` is the numeric rank of `a`.
pub fn psd_factor<T: Real>(a: &SymMatrix<T>, tol: T) -> Result<Dense<T>> {
    let n = a.dim();
    let e = spectrum(a);
    if n > 0 && e.min() < -tol * T::one().max(a.fro_norm()) {
        return Err(Error::NotPsd {
            min_eigenvalue: e.min().as_f64(),
        });
    }
    let thr = rank_threshold(&e, tol);
    let keep: Vec<usize> = (0..n).filter(|&k| e.eigenvalues[k] > thr).collect();
    let mut f = Dense::zeros(n, keep.len());
    for (col, &k) in keep.iter().enumerate() {
        let s = e.eigenvalues[k].sqrt();
        for i in 0..n {
            f[(i, col)] = e.eigenvectors[(i, k)] * s;
        }
    }
    Ok(f)
}
