//! Small dense real linear algebra.
//!
//! Everything here works on tiny matrices (dimensions up to a few hundred), so
//! the routines favour simple, well-conditioned algorithms over blocked BLAS
//! style kernels: scaling-and-squaring Taylor exponentials, cyclic Jacobi for
//! symmetric spectra, and one-sided (Hestenes) Jacobi for singular values.

use std::fmt;
use std::ops::{Index, IndexMut};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{Gaussian, RngSeed};

/// Row-major dense matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major values. Rejects empty shapes, length
    /// mismatches and non-finite entries.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::domain(format!(
                "matrix shape {rows}x{cols} is empty"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::domain(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "non-finite entry at ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Matrix { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        Matrix { rows, cols, values }
    }

    /// Builds a matrix whose `j`-th column is `columns[j]`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().position(|c| c.len() != rows) {
            return Err(Error::domain(format!(
                "column {bad} has length {}, expected {rows}",
                columns[bad].len()
            )));
        }
        let values = (0..rows)
            .flat_map(|i| columns.iter().map(move |c| c[i]))
            .collect();
        Self::new(rows, cols, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[f64]) {
        assert_eq!(col.len(), self.rows, "column length mismatch");
        for (i, v) in col.iter().enumerate() {
            self[(i, j)] = *v;
        }
    }

    pub fn column_norm(&self, j: usize) -> f64 {
        (0..self.rows)
            .map(|i| self[(i, j)].powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn column_dot(&self, a: usize, b: usize) -> f64 {
        (0..self.rows).map(|i| self[(i, a)] * self[(i, b)]).sum()
    }

    pub fn transpose(&self) -> Matrix {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul shape mismatch {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.values[i * rhs.cols + j] += a * rhs.values[k * rhs.cols + j];
                }
            }
        }
        out
    }

    /// `selfᵀ · rhs` without materializing the transpose.
    pub fn t_matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.rows, rhs.rows, "t_matmul shape mismatch");
        let mut out = Matrix::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            for i in 0..self.cols {
                let a = self[(k, i)];
                for j in 0..rhs.cols {
                    out.values[i * rhs.cols + j] += a * rhs.values[k * rhs.cols + j];
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &Matrix) -> Matrix {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Matrix) -> Matrix {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn scale(&self, k: f64) -> Matrix {
        self.map(|v| v * k)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip_with(&self, rhs: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "shape mismatch"
        );
        Matrix {
            rows: self.rows,
            cols: self.cols,
            values: self
                .values
                .iter()
                .zip(&rhs.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Induced 1-norm (max absolute column sum).
    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Largest entrywise deviation of `selfᵀ self` from the identity.
    pub fn orthogonality_defect(&self) -> f64 {
        let g = self.t_matmul(self);
        g.sub(&Matrix::identity(g.rows)).max_abs()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.values[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.values[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(
                f,
                "  {:?}",
                &self.values[i * self.cols..(i + 1) * self.cols]
            )?;
        }
        write!(f, "]")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Numerically stable `log Σ exp(v)`.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Softmax with max-subtraction.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::domain("softmax of an empty vector"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("softmax input has non-finite entries"));
    }
    Ok(softmax_unchecked(v))
}

pub(crate) fn softmax_unchecked(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    out
}

const EXP_TAYLOR_ORDER: usize = 18;

/// `exp(A − Aᵀ)`, an element of SO(n).
///
/// Scaling and squaring: the skew part is halved until its 1-norm is at most
/// 0.5 and exponentiated by a degree-18 Taylor polynomial. Repeated squaring
/// undoes the halving.
pub fn matrix_exp_skew(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::domain(format!(
            "matrix exponential needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_finite() {
        return Err(Error::domain(
            "matrix exponential input has non-finite entries",
        ));
    }
    let n = a.rows();
    let skew = a.sub(&a.transpose());

    let mut squarings = 0u32;
    let mut norm = skew.norm_1();
    while norm > 0.5 {
        norm /= 2.0;
        squarings += 1;
    }
    let x = skew.scale(0.5f64.powi(squarings as i32));

    let mut result = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=EXP_TAYLOR_ORDER {
        term = term.matmul(&x).scale(1.0 / k as f64);
        result = result.add(&term);
    }
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    Ok(result)
}

/// Rotation `exp(A − Aᵀ)` with `A` a standard-normal `d×d` matrix drawn
/// row-major from the seeded stream.
pub fn random_rotation(d: usize, seed: RngSeed) -> Result<Matrix> {
    if d == 0 {
        return Err(Error::domain("rotation dimension must be positive"));
    }
    let mut g = Gaussian::new(seed.stream());
    let a = Matrix::from_fn(d, d, |_, _| g.sample());
    matrix_exp_skew(&a)
}

/// Uniformly random permutation matrix `P = I[π, :]` (row `i` has its one in
/// column `π(i)`), with `π` from a Fisher–Yates shuffle of the seeded stream.
pub fn random_permutation(c: usize, seed: RngSeed) -> Result<Matrix> {
    if c == 0 {
        return Err(Error::domain("permutation size must be positive"));
    }
    let mut perm: Vec<usize> = (0..c).collect();
    perm.shuffle(&mut seed.stream());
    Ok(permutation_matrix(&perm))
}

/// Permutation matrix with `P[i][perm[i]] = 1`.
pub fn permutation_matrix(perm: &[usize]) -> Matrix {
    let n = perm.len();
    let mut p = Matrix::zeros(n, n);
    for (i, &j) in perm.iter().enumerate() {
        p[(i, j)] = 1.0;
    }
    p
}

/// Recovers `π` from a permutation matrix, or `None` if `p` is not a square
/// 0/1 matrix with exactly one 1 per row and per column.
pub fn permutation_of(p: &Matrix) -> Option<Vec<usize>> {
    if !p.is_square() {
        return None;
    }
    let n = p.rows();
    let mut perm = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for i in 0..n {
        let mut hit = None;
        for j in 0..n {
            let v = p[(i, j)];
            if v == 1.0 {
                if hit.is_some() {
                    return None;
                }
                hit = Some(j);
            } else if v != 0.0 {
                return None;
            }
        }
        let j = hit?;
        if std::mem::replace(&mut seen[j], true) {
            return None;
        }
        perm.push(j);
    }
    Some(perm)
}

/// Determinant of the `n×n` matrix with `a` on the diagonal and `c` elsewhere:
/// `(a − c)^(n−1) (a + (n−1)c)`.
pub fn structured_determinant(a: f64, c: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("structured determinant needs n >= 1"));
    }
    Ok((a - c).powi(n as i32 - 1) * (a + (n as f64 - 1.0) * c))
}

/// Singular values (descending) by one-sided Jacobi rotations, which
/// diagonalize `GᵀG` implicitly without squaring the condition number.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    // Work on whichever orientation has fewer columns.
    let work = if m.cols() > m.rows() {
        m.transpose()
    } else {
        m.clone()
    };
    let mut cols = work.columns();
    let n = cols.len();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                for (x, y) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let (xp, yq) = (*x, *y);
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of singular values above `tol × σ_max`.
pub fn numerical_rank(m: &Matrix, tol: f64) -> Result<usize> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!(
            "rank tolerance must be positive, got {tol}"
        )));
    }
    let sv = singular_values(m);
    let largest = sv.first().copied().unwrap_or(0.0);
    if largest == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > tol * largest).count())
}

/// Eigenvalues (ascending) of a symmetric matrix by cyclic Jacobi.
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::domain("eigenvalues need a square matrix"));
    }
    let n = m.rows();
    let mut a = m.clone();
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].powi(2))
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 { 1.0 } else { -1.0 }
                    / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}
